//! Model parameters, configurations and the per-site transition rates.
//!
//! A site in state 0 becomes aware at rate `lambda * (n1 + n2)` and adopts
//! spontaneously at rate `gamma`; an aware site adopts at rate `alpha * n2`;
//! informed sites (states 1 and 2) forget at rate `forget`. Here `n_i` is the
//! number of nearest neighbors in state `i`. With `gamma = 0` and `forget = 1`
//! this is the base innovation process.

mod initial;
mod transient;

pub use initial::InitialCondition;
pub use transient::{exact_transient, exact_transient_with, Distribution, TransientOptions};

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};

/// Agent state. The derived order `Ignorant < Aware < Adopter` is the partial
/// order preserved by the monotone couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum State {
    Ignorant = 0,
    Aware = 1,
    Adopter = 2,
}

impl State {
    pub const ALL: [State; 3] = [State::Ignorant, State::Aware, State::Adopter];

    pub fn from_u8(v: u8) -> Option<State> {
        match v {
            0 => Some(State::Ignorant),
            1 => Some(State::Aware),
            2 => Some(State::Adopter),
            _ => None,
        }
    }

    #[inline]
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Aware or adopter.
    #[inline]
    pub fn is_informed(self) -> bool {
        self != State::Ignorant
    }
}

/// Rates of the process. All are finite and non-negative; `forget` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda: f64,
    pub alpha: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_forget")]
    pub forget: f64,
}

fn default_forget() -> f64 {
    1.0
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "{name} must be finite and non-negative, got {v}"
        )))
    }
}

impl Params {
    /// Base model: `gamma = 0`, `forget = 1`.
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            lambda,
            alpha,
            gamma: 0.0,
            forget: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    /// Every result about the model assumes `forget = 1`; other values are for
    /// robustness experiments.
    pub fn with_forget(mut self, forget: f64) -> Result<Self> {
        self.forget = forget;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("lambda", self.lambda)?;
        check_rate("alpha", self.alpha)?;
        check_rate("gamma", self.gamma)?;
        check_rate("forget", self.forget)?;
        if self.forget == 0.0 {
            return Err(Error::InvalidParams("forget must be positive".into()));
        }
        Ok(())
    }
}

/// Assignment of a [`State`] to every site of a lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(Vec<State>);

impl Configuration {
    pub fn new(states: Vec<State>) -> Self {
        Self(states)
    }

    pub fn uniform(len: usize, state: State) -> Self {
        Self(vec![state; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::uniform(len, State::Ignorant)
    }

    /// Builds a configuration from digits in `{0, 1, 2}`.
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        digits
            .iter()
            .map(|&d| {
                State::from_u8(d)
                    .ok_or_else(|| Error::InvalidConfiguration(format!("state {d} not in {{0,1,2}}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// A single site in `state` on an otherwise ignorant lattice.
    pub fn single(len: usize, site: Site, state: State) -> Result<Self> {
        if site.0 >= len {
            return Err(Error::InvalidSite {
                index: site.0,
                site_count: len,
            });
        }
        let mut c = Self::zeros(len);
        c.0[site.0] = state;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, site: Site) -> State {
        self.0[site.0]
    }

    #[inline]
    pub fn set(&mut self, site: Site, state: State) {
        self.0[site.0] = state;
    }

    pub fn states(&self) -> &[State] {
        &self.0
    }

    pub fn states_mut(&mut self) -> &mut [State] {
        &mut self.0
    }

    pub fn into_states(self) -> Vec<State> {
        self.0
    }

    pub fn digits(&self) -> Vec<u8> {
        self.0.iter().map(|s| s.as_u8()).collect()
    }

    /// Counts of sites in states 0, 1 and 2.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.0 {
            c[*s as usize] += 1;
        }
        c
    }

    /// Base-3 code with site 0 as the least significant digit.
    pub fn code(&self) -> u64 {
        self.0
            .iter()
            .rev()
            .fold(0u64, |acc, s| acc * 3 + s.as_u8() as u64)
    }

    pub fn from_code(mut code: u64, len: usize) -> Self {
        let mut states = Vec::with_capacity(len);
        for _ in 0..len {
            states.push(State::from_u8((code % 3) as u8).unwrap());
            code /= 3;
        }
        Self(states)
    }

    pub fn check_len(&self, lattice: &Lattice) -> Result<()> {
        if self.len() == lattice.site_count() {
            Ok(())
        } else {
            Err(Error::LatticeMismatch {
                expected: lattice.site_count(),
                found: self.len(),
            })
        }
    }

    /// Pointwise `self <= other` under `0 < 1 < 2`.
    pub fn dominated_by(&self, other: &Configuration) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_u8())?;
        }
        Ok(())
    }
}

/// Possible transitions of one site: at most two channels are ever open.
pub type Channels = ArrayVec<(State, f64), 2>;

#[inline]
pub(crate) fn counts_in(lattice: &Lattice, states: &[State], site: Site) -> (usize, usize) {
    let mut n1 = 0;
    let mut n2 = 0;
    for (_, y) in lattice.neighbors_by_direction(site) {
        match states[y.0] {
            State::Aware => n1 += 1,
            State::Adopter => n2 += 1,
            State::Ignorant => {}
        }
    }
    (n1, n2)
}

/// Transition channels of a site with the given state and neighbor counts.
/// Zero-rate channels are omitted.
#[inline]
pub fn channels(state: State, n1: usize, n2: usize, params: &Params) -> Channels {
    let mut out = Channels::new();
    let mut push = |to: State, rate: f64| {
        if rate > 0.0 {
            out.push((to, rate));
        }
    };
    match state {
        State::Ignorant => {
            push(State::Aware, params.lambda * (n1 + n2) as f64);
            push(State::Adopter, params.gamma);
        }
        State::Aware => {
            push(State::Adopter, params.alpha * n2 as f64);
            push(State::Ignorant, params.forget);
        }
        State::Adopter => push(State::Ignorant, params.forget),
    }
    out
}

/// `(n1, n2)`: numbers of aware and adopter neighbors of `site`.
pub fn neighbor_counts(lattice: &Lattice, config: &Configuration, site: Site) -> Result<(usize, usize)> {
    config.check_len(lattice)?;
    lattice.check(site)?;
    Ok(counts_in(lattice, config.states(), site))
}

/// Nonzero-rate transitions `(target state, rate)` of `site`.
pub fn local_rates(
    lattice: &Lattice,
    config: &Configuration,
    site: Site,
    params: &Params,
) -> Result<Vec<(State, f64)>> {
    let (n1, n2) = neighbor_counts(lattice, config, site)?;
    Ok(channels(config.get(site), n1, n2, params).to_vec())
}

#[inline]
pub(crate) fn site_rate(lattice: &Lattice, states: &[State], site: Site, params: &Params) -> f64 {
    let (n1, n2) = counts_in(lattice, states, site);
    channels(states[site.0], n1, n2, params)
        .iter()
        .map(|c| c.1)
        .sum()
}

/// Sum of all local rates; zero exactly when the configuration is absorbing.
pub fn total_rate(lattice: &Lattice, config: &Configuration, params: &Params) -> Result<f64> {
    config.check_len(lattice)?;
    Ok(lattice
        .sites()
        .map(|x| site_rate(lattice, config.states(), x, params))
        .sum())
}
