//! Named initial conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Configuration, State};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::rng::{tag, CounterRng};

/// Initial-condition preset. The text form (used in config files and flags)
/// is one of `single-adopter-origin`, `single-aware-origin`, `all-aware`,
/// `all-adopter`, `product:p0,p1,p2` or `explicit:s0,s1,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialCondition {
    SingleAdopterOrigin,
    SingleAwareOrigin,
    AllAware,
    AllAdopter,
    /// Independent sites with the given state probabilities.
    Product([f64; 3]),
    Explicit(Vec<u8>),
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Product(p) => {
                let sum: f64 = p.iter().sum();
                if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfiguration(format!(
                        "product-measure probabilities must be non-negative and sum to 1, got {p:?}"
                    )));
                }
                Ok(())
            }
            Self::Explicit(d) => Configuration::from_digits(d).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Configuration on `lattice`. Only the product measure consumes `seed`.
    pub fn build(&self, lattice: &Lattice, seed: u64) -> Result<Configuration> {
        self.validate()?;
        let n = lattice.site_count();
        match self {
            Self::SingleAdopterOrigin => Configuration::single(n, lattice.center(), State::Adopter),
            Self::SingleAwareOrigin => Configuration::single(n, lattice.center(), State::Aware),
            Self::AllAware => Ok(Configuration::uniform(n, State::Aware)),
            Self::AllAdopter => Ok(Configuration::uniform(n, State::Adopter)),
            Self::Product(p) => {
                let mut rng = CounterRng::from_path(seed, &[tag::INITIAL]);
                Ok(Configuration::new(
                    (0..n)
                        .map(|_| {
                            let u = rng.next_f64();
                            if u < p[0] {
                                State::Ignorant
                            } else if u < p[0] + p[1] {
                                State::Aware
                            } else {
                                State::Adopter
                            }
                        })
                        .collect(),
                ))
            }
            Self::Explicit(d) => {
                let c = Configuration::from_digits(d)?;
                c.check_len(lattice)?;
                Ok(c)
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(",");
        match self {
            Self::SingleAdopterOrigin => f.write_str("single-adopter-origin"),
            Self::SingleAwareOrigin => f.write_str("single-aware-origin"),
            Self::AllAware => f.write_str("all-aware"),
            Self::AllAdopter => f.write_str("all-adopter"),
            Self::Product(p) => write!(f, "product:{}", join(&mut p.iter().map(|v| v.to_string()))),
            Self::Explicit(d) => write!(f, "explicit:{}", join(&mut d.iter().map(|v| v.to_string()))),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfiguration(format!("unknown initial condition '{s}'"));
        let parsed = match s.trim() {
            "single-adopter-origin" => Self::SingleAdopterOrigin,
            "single-aware-origin" => Self::SingleAwareOrigin,
            "all-aware" => Self::AllAware,
            "all-adopter" => Self::AllAdopter,
            other => {
                let (name, list) = other.split_once(':').ok_or_else(bad)?;
                let items = list.split(',').map(str::trim);
                match name {
                    "product" => {
                        let v: Vec<f64> = items
                            .map(|x| x.parse().map_err(|_| bad()))
                            .collect::<Result<_>>()?;
                        Self::Product(v.try_into().map_err(|_| bad())?)
                    }
                    "explicit" => Self::Explicit(
                        items
                            .map(|x| x.parse().map_err(|_| bad()))
                            .collect::<Result<_>>()?,
                    ),
                    _ => return Err(bad()),
                }
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

impl TryFrom<String> for InitialCondition {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialCondition> for String {
    fn from(c: InitialCondition) -> String {
        c.to_string()
    }
}
