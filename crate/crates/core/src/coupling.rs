//! Pathwise couplings on shared Poisson marks.
//!
//! * Contact projection: merging states 1 and 2 and replaying the same
//!   lambda-arrows and death marks (alpha-arrows ignored) gives a contact
//!   process whose path is the projection of the innovation path.
//! * Alpha monotonicity: one alpha-stream at the larger rate, thinned for the
//!   smaller one, with every other mark shared. Each rule preserves the
//!   pointwise order `0 < 1 < 2` when `gamma = 0`, so the low process stays
//!   below the high one forever.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Configuration, Params, State};
use crate::error::{Error, Result};
use crate::harris::{evolve_harris, generate_events, ClockKind, EventKind, EventStream};
use crate::lattice::{Lattice, Site};
use crate::trajectory::{Change, Trajectory};

/// Two-state configuration of the contact process: `true` is infected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContactConfiguration(Vec<bool>);

impl ContactConfiguration {
    pub fn new(infected: Vec<bool>) -> Self {
        Self(infected)
    }

    pub fn infected(&self) -> &[bool] {
        &self.0
    }

    pub fn digits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Replaces every 2 by a 1.
pub fn project_to_contact(config: &Configuration) -> ContactConfiguration {
    ContactConfiguration(config.states().iter().map(|s| s.is_informed()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactChange {
    pub time: f64,
    pub site: Site,
    pub infected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactTrajectory {
    pub initial: ContactConfiguration,
    pub changes: Vec<ContactChange>,
    pub horizon: f64,
}

impl ContactTrajectory {
    pub fn config_at(&self, t: f64) -> ContactConfiguration {
        let mut c = self.initial.clone();
        for ch in self.changes.iter().take_while(|ch| ch.time <= t) {
            c.0[ch.site.0] = ch.infected;
        }
        c
    }
}

fn reject_gamma(stream: &EventStream) -> Result<()> {
    if stream.count(ClockKind::Gamma) > 0 {
        return Err(Error::Coupling(
            "the contact projection is defined for the base model; stream has gamma marks".into(),
        ));
    }
    Ok(())
}

fn contact_step(xi: &mut [bool], kind: &EventKind) -> Option<(Site, bool)> {
    match *kind {
        EventKind::Lambda { from, to } if xi[from.0] && !xi[to.0] => {
            xi[to.0] = true;
            Some((to, true))
        }
        EventKind::Death { at } if xi[at.0] => {
            xi[at.0] = false;
            Some((at, false))
        }
        _ => None,
    }
}

/// Runs the innovation process and its contact projection on one stream.
pub fn coupled_contact(
    initial: &Configuration,
    stream: &EventStream,
) -> Result<(Trajectory, ContactTrajectory)> {
    reject_gamma(stream)?;
    let innovation = evolve_harris(initial, stream)?;
    let start = project_to_contact(initial);
    let mut xi = start.0.clone();
    let changes = stream
        .events()
        .iter()
        .filter_map(|e| {
            contact_step(&mut xi, &e.kind).map(|(site, infected)| ContactChange {
                time: e.time,
                site,
                infected,
            })
        })
        .collect();
    Ok((
        innovation,
        ContactTrajectory {
            initial: start,
            changes,
            horizon: stream.horizon(),
        },
    ))
}

/// Replays both processes in lockstep and counts the event times at which
/// the projection identity fails.
pub fn projection_violations(initial: &Configuration, stream: &EventStream) -> Result<usize> {
    reject_gamma(stream)?;
    if initial.len() != stream.sites() {
        return Err(Error::LatticeMismatch {
            expected: stream.sites(),
            found: initial.len(),
        });
    }
    let mut eta = initial.states().to_vec();
    let mut xi = project_to_contact(initial).0;
    let mismatched = |eta: &[State], xi: &[bool], s: Site| eta[s.0].is_informed() != xi[s.0];
    let mut bad = (0..eta.len()).filter(|&i| mismatched(&eta, &xi, Site(i))).count();
    let mut violations = usize::from(bad > 0);
    for e in stream.events() {
        let (a, b) = e.kind.endpoints();
        let before = usize::from(mismatched(&eta, &xi, a)) + usize::from(a != b && mismatched(&eta, &xi, b));
        crate::harris::apply_in_place(&mut eta, &e.kind, None);
        contact_step(&mut xi, &e.kind);
        let after = usize::from(mismatched(&eta, &xi, a)) + usize::from(a != b && mismatched(&eta, &xi, b));
        bad = bad + after - before;
        violations += usize::from(bad > 0);
    }
    Ok(violations)
}

/// Two innovation paths with `alpha_low <= alpha_high` on shared marks.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub low: Trajectory,
    pub high: Trajectory,
    pub shared_seed: u64,
    pub alpha_low: f64,
    pub alpha_high: f64,
}

impl CoupledPair {
    /// Number of change instants (of either path) at which some site has
    /// `low > high`. Zero whenever the coupling is monotone.
    pub fn ordering_violations(&self) -> usize {
        ordering_violations(&self.low, &self.high)
    }
}

/// Counts instants, among time 0 and all change times of either path, at
/// which `low(x) > high(x)` for some `x`.
pub fn ordering_violations(low: &Trajectory, high: &Trajectory) -> usize {
    let mut lo = low.initial().states().to_vec();
    let mut hi = high.initial().states().to_vec();
    let above = |lo: &[State], hi: &[State], i: usize| usize::from(lo[i] > hi[i]);
    let mut bad: usize = (0..lo.len()).map(|i| above(&lo, &hi, i)).sum();
    let mut violations = usize::from(bad > 0);
    let (a, b) = (low.changes(), high.changes());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.time.min(y.time),
            (Some(x), None) => x.time,
            (None, Some(y)) => y.time,
            (None, None) => unreachable!(),
        };
        let mut apply = |changes: &[Change], k: &mut usize, target: &mut Vec<State>, other: &[State], is_low: bool| {
            while let Some(c) = changes.get(*k).filter(|c| c.time == t) {
                let s = c.site.0;
                let (l, h) = if is_low { (target[s], other[s]) } else { (other[s], target[s]) };
                bad -= usize::from(l > h);
                target[s] = c.to;
                let (l, h) = if is_low { (target[s], other[s]) } else { (other[s], target[s]) };
                bad += usize::from(l > h);
                *k += 1;
            }
        };
        apply(a, &mut i, &mut lo, &hi, true);
        apply(b, &mut j, &mut hi, &lo, false);
        violations += usize::from(bad > 0);
    }
    violations
}

/// Builds the monotone alpha-coupling. `params` supplies `lambda` and
/// `forget`; its `alpha` is replaced by `alpha_high` for the generated stream.
/// The low path keeps each alpha-arrow with probability
/// `alpha_low / alpha_high`.
///
/// `gamma` must be 0: a gamma mark can turn an ignorant low site into an
/// adopter while the dominating site is merely aware, so the order is not
/// preserved with spontaneous adoption.
pub fn coupled_alpha_pair(
    lattice: &Lattice,
    params: &Params,
    alpha_low: f64,
    alpha_high: f64,
    initial: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<CoupledPair> {
    if !(alpha_low >= 0.0 && alpha_low <= alpha_high) {
        return Err(Error::Coupling(format!(
            "need 0 <= alpha_low <= alpha_high, got {alpha_low} and {alpha_high}"
        )));
    }
    if params.gamma != 0.0 {
        return Err(Error::Coupling(
            "the alpha coupling is monotone only for gamma = 0".into(),
        ));
    }
    let high_params = params.with_alpha(alpha_high)?;
    let stream = generate_events(lattice, &high_params, horizon, seed)?;
    let keep = if alpha_high > 0.0 {
        alpha_low / alpha_high
    } else {
        0.0
    };
    let low_stream = stream.thinned([1.0, keep, 1.0, 1.0]);
    Ok(CoupledPair {
        low: evolve_harris(initial, &low_stream)?,
        high: evolve_harris(initial, &stream)?,
        shared_seed: seed,
        alpha_low,
        alpha_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harris::{apply_in_place, Event};
    use crate::lattice::Boundary;

    #[test]
    fn projection_examples() {
        let c = Configuration::from_digits(&[0, 1, 2, 0]).unwrap();
        assert_eq!(project_to_contact(&c).digits(), vec![0, 1, 1, 0]);
        assert_eq!(project_to_contact(&Configuration::zeros(3)).digits(), vec![0, 0, 0]);
        assert_eq!(
            project_to_contact(&Configuration::uniform(3, State::Adopter)).digits(),
            vec![1, 1, 1]
        );
    }

    #[test]
    fn empty_stream_keeps_both_constant() {
        let init = Configuration::from_digits(&[2, 0, 1]).unwrap();
        let s = EventStream::new(3, 1.0, 0, vec![]).unwrap();
        let (eta, xi) = coupled_contact(&init, &s).unwrap();
        assert!(eta.changes().is_empty() && xi.changes.is_empty());
        assert_eq!(projection_violations(&init, &s).unwrap(), 0);
    }

    #[test]
    fn alpha_arrows_are_invisible_to_the_contact_process() {
        let init = Configuration::from_digits(&[2, 1, 1]).unwrap();
        let events = vec![
            Event { time: 0.2, kind: EventKind::Alpha { from: Site(0), to: Site(1) } },
            Event { time: 0.4, kind: EventKind::Alpha { from: Site(1), to: Site(2) } },
        ];
        let s = EventStream::new(3, 1.0, 0, events).unwrap();
        let (eta, xi) = coupled_contact(&init, &s).unwrap();
        assert_eq!(eta.final_config().digits(), vec![2, 2, 2]);
        assert!(xi.changes.is_empty());
        assert_eq!(projection_violations(&init, &s).unwrap(), 0);
    }

    #[test]
    fn gamma_streams_are_rejected() {
        let events = vec![Event { time: 0.2, kind: EventKind::Gamma { at: Site(0) } }];
        let s = EventStream::new(2, 1.0, 0, events).unwrap();
        assert!(coupled_contact(&Configuration::zeros(2), &s).is_err());
    }

    #[test]
    fn seeded_projection_holds_at_every_change() {
        let l = Lattice::line(20, Boundary::Torus).unwrap();
        let p = Params::new(2.0, 5.0).unwrap();
        let init = Configuration::single(20, Site(10), State::Adopter).unwrap();
        for seed in 0..50 {
            let s = generate_events(&l, &p, 10.0, seed).unwrap();
            assert_eq!(projection_violations(&init, &s).unwrap(), 0);
            let (eta, xi) = coupled_contact(&init, &s).unwrap();
            for t in eta.change_times() {
                assert_eq!(project_to_contact(&eta.config_at(t).unwrap()), xi.config_at(t));
            }
        }
    }

    /// Every event rule preserves `low <= high` on the two endpoints, for all
    /// ordered state pairs, with the low process possibly skipping an
    /// alpha-arrow the high one executes.
    #[test]
    fn rules_preserve_the_order_exhaustively() {
        let kinds = [
            EventKind::Lambda { from: Site(0), to: Site(1) },
            EventKind::Alpha { from: Site(0), to: Site(1) },
            EventKind::Death { at: Site(1) },
        ];
        let mut checked = 0;
        for lx in State::ALL {
            for ly in State::ALL {
                for hx in State::ALL.into_iter().filter(|&h| h >= lx) {
                    for hy in State::ALL.into_iter().filter(|&h| h >= ly) {
                        for kind in kinds {
                            for low_keeps in [true, false] {
                                if !low_keeps && kind.clock() != ClockKind::Alpha {
                                    continue;
                                }
                                let mut lo = vec![lx, ly];
                                let mut hi = vec![hx, hy];
                                if low_keeps {
                                    apply_in_place(&mut lo, &kind, None);
                                }
                                apply_in_place(&mut hi, &kind, None);
                                assert!(lo[0] <= hi[0] && lo[1] <= hi[1], "{lx:?}{ly:?} <= {hx:?}{hy:?} under {kind:?}");
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 0);
        // the gamma rule is the exception
        let mut lo = vec![State::Ignorant];
        let mut hi = vec![State::Aware];
        apply_in_place(&mut lo, &EventKind::Gamma { at: Site(0) }, None);
        apply_in_place(&mut hi, &EventKind::Gamma { at: Site(0) }, None);
        assert!(lo[0] > hi[0]);
    }

    #[test]
    fn equal_alphas_give_identical_paths() {
        let l = Lattice::line(15, Boundary::Torus).unwrap();
        let p = Params::new(2.0, 0.0).unwrap();
        let init = Configuration::single(15, Site(7), State::Adopter).unwrap();
        let pair = coupled_alpha_pair(&l, &p, 3.0, 3.0, &init, 10.0, 8).unwrap();
        assert_eq!(pair.low, pair.high);
    }

    #[test]
    fn zero_low_alpha_never_adopts() {
        let l = Lattice::line(15, Boundary::Torus).unwrap();
        let p = Params::new(2.0, 0.0).unwrap();
        let init = Configuration::single(15, Site(7), State::Adopter).unwrap();
        for seed in 0..20 {
            let pair = coupled_alpha_pair(&l, &p, 0.0, 4.0, &init, 10.0, seed).unwrap();
            assert!(pair.low.changes().iter().all(|c| c.to != State::Adopter));
            assert_eq!(pair.ordering_violations(), 0);
        }
    }

    #[test]
    fn coupling_preconditions() {
        let l = Lattice::line(5, Boundary::Torus).unwrap();
        let p = Params::new(1.0, 0.0).unwrap();
        let init = Configuration::zeros(5);
        assert!(coupled_alpha_pair(&l, &p, 2.0, 1.0, &init, 1.0, 0).is_err());
        let g = p.with_gamma(0.1).unwrap();
        assert!(coupled_alpha_pair(&l, &g, 0.5, 1.0, &init, 1.0, 0).is_err());
    }

    #[test]
    fn violation_counter_detects_disorder() {
        let lo = Trajectory::constant(Configuration::from_digits(&[2, 0]).unwrap(), 1.0);
        let hi = Trajectory::new(
            Configuration::from_digits(&[2, 1]).unwrap(),
            vec![Change { time: 0.5, site: Site(0), from: State::Adopter, to: State::Ignorant }],
            1.0,
        )
        .unwrap();
        assert_eq!(ordering_violations(&lo, &hi), 1);
        assert_eq!(ordering_violations(&hi, &hi), 0);
    }
}
