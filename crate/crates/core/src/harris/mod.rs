//! Graphical construction of the process from independent Poisson clocks.
//!
//! Every ordered neighbor pair `(x, y)` carries a `lambda`-clock and an
//! `alpha`-clock, every site a death clock (rate `forget`) and a spontaneous
//! adoption clock (rate `gamma`). Replaying the merged arrivals with the rules
//! of [`apply_event`] yields a version of the process:
//!
//! * `Lambda x -> y`: if `x` is informed and `y` is ignorant, `y` becomes aware.
//! * `Alpha x -> y`: if `x` is an adopter and `y` is aware, `y` adopts.
//! * `Death x`: an informed `x` becomes ignorant.
//! * `Gamma x`: an ignorant `x` adopts.
//!
//! [`generate_events`] materializes the whole space-time box; [`Engine`]
//! produces the same realization lazily.

mod clock;
mod dump;
mod engine;

pub use clock::{ClockKind, Frame, CHUNK};
pub use engine::{Advance, Engine, EngineOptions};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Configuration, Params, State};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::rng::{derive, mix64, tag, unit_open};
use crate::trajectory::{Change, Trajectory};
use clock::Clocks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Lambda { from: Site, to: Site },
    Alpha { from: Site, to: Site },
    Death { at: Site },
    Gamma { at: Site },
}

impl EventKind {
    pub fn clock(&self) -> ClockKind {
        match self {
            EventKind::Lambda { .. } => ClockKind::Lambda,
            EventKind::Alpha { .. } => ClockKind::Alpha,
            EventKind::Death { .. } => ClockKind::Death,
            EventKind::Gamma { .. } => ClockKind::Gamma,
        }
    }

    /// `(from, to)`; site events report their site twice.
    pub fn endpoints(&self) -> (Site, Site) {
        match *self {
            EventKind::Lambda { from, to } | EventKind::Alpha { from, to } => (from, to),
            EventKind::Death { at } | EventKind::Gamma { at } => (at, at),
        }
    }

    fn clock_event(lattice: &Lattice, kind: ClockKind, site: Site, dir: usize) -> Option<Self> {
        Some(match kind {
            ClockKind::Lambda => EventKind::Lambda {
                from: site,
                to: lattice.neighbor(site, dir)?,
            },
            ClockKind::Alpha => EventKind::Alpha {
                from: site,
                to: lattice.neighbor(site, dir)?,
            },
            ClockKind::Death => EventKind::Death { at: site },
            ClockKind::Gamma => EventKind::Gamma { at: site },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Time-sorted Poisson arrivals on `(0, horizon]` for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    sites: usize,
    horizon: f64,
    seed: u64,
    events: Vec<Event>,
}

impl EventStream {
    /// Wraps hand-built events. Times must lie in `(0, horizon]` and be
    /// non-decreasing; endpoints must be valid sites.
    pub fn new(sites: usize, horizon: f64, seed: u64, events: Vec<Event>) -> Result<Self> {
        check_horizon(horizon)?;
        let mut last = 0.0;
        for (i, e) in events.iter().enumerate() {
            if !(e.time > 0.0 && e.time <= horizon && e.time >= last) {
                return Err(Error::Invalid(format!(
                    "event {i} at time {} is out of order or outside (0, {horizon}]",
                    e.time
                )));
            }
            let (a, b) = e.kind.endpoints();
            if a.0 >= sites || b.0 >= sites {
                return Err(Error::InvalidSite {
                    index: a.0.max(b.0),
                    site_count: sites,
                });
            }
            last = e.time;
        }
        Ok(Self {
            sites,
            horizon,
            seed,
            events,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: ClockKind) -> usize {
        self.events.iter().filter(|e| e.kind.clock() == kind).count()
    }

    /// Keeps each event of clock kind `k` independently with probability
    /// `keep[k]`, decided by [`thinning_uniform`]. Applying this with
    /// coordinate-wise larger `keep` retains a superset of events.
    pub fn thinned(&self, keep: [f64; 4]) -> EventStream {
        let events = self
            .events
            .iter()
            .filter(|e| {
                let p = keep[e.kind.clock() as usize];
                p >= 1.0 || thinning_uniform(self.seed, e) < p
            })
            .copied()
            .collect();
        EventStream {
            events,
            ..self.clone()
        }
    }

    /// Line-oriented text dump: a header, then `time kind from to` per event.
    pub fn to_text(&self) -> String {
        dump::write(self)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        dump::read(text)
    }
}

/// Uniform mark attached to an event, a pure function of the seed and the
/// event's identity. Used to thin streams.
pub fn thinning_uniform(seed: u64, event: &Event) -> f64 {
    let (from, to) = event.kind.endpoints();
    let mut key = derive(seed, tag::THINNING);
    key = derive(key, event.kind.clock() as u64);
    key = derive(key, from.0 as u64);
    key = derive(key, to.0 as u64);
    unit_open(mix64(key ^ event.time.to_bits()))
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(format!(
            "horizon must be positive and finite, got {horizon}"
        )))
    }
}

/// Applies one event rule in place. Returns the effective change, if any.
/// Death marks at clamped sites are ignored.
#[inline]
pub(crate) fn apply_in_place(
    states: &mut [State],
    kind: &EventKind,
    clamped: Option<&[bool]>,
) -> Option<(Site, State, State)> {
    let (site, to) = match *kind {
        EventKind::Lambda { from, to }
            if states[from.0].is_informed() && states[to.0] == State::Ignorant =>
        {
            (to, State::Aware)
        }
        EventKind::Alpha { from, to }
            if states[from.0] == State::Adopter && states[to.0] == State::Aware =>
        {
            (to, State::Adopter)
        }
        EventKind::Death { at }
            if states[at.0].is_informed() && !clamped.is_some_and(|c| c[at.0]) =>
        {
            (at, State::Ignorant)
        }
        EventKind::Gamma { at } if states[at.0] == State::Ignorant => (at, State::Adopter),
        _ => return None,
    };
    let from = states[site.0];
    states[site.0] = to;
    Some((site, from, to))
}

/// Configuration after applying one event; unchanged when the rule's
/// precondition fails.
pub fn apply_event(config: &Configuration, event: &Event) -> Configuration {
    let mut next = config.clone();
    apply_in_place(next.states_mut(), &event.kind, None);
    next
}

/// Eagerly generates every Poisson arrival in the space-time box
/// `lattice x (0, horizon]`.
///
/// Ties on identical timestamps (possible only through floating-point
/// coincidence) are broken by clock kind, then clock index.
pub fn generate_events(lattice: &Lattice, params: &Params, horizon: f64, seed: u64) -> Result<EventStream> {
    generate_events_in(lattice, params, horizon, seed, None)
}

/// As [`generate_events`], with the clocks keyed through `frame`.
pub fn generate_events_in(
    lattice: &Lattice,
    params: &Params,
    horizon: f64,
    seed: u64,
    frame: Option<&Frame>,
) -> Result<EventStream> {
    check_horizon(horizon)?;
    params.validate()?;
    let clocks = Clocks::new(lattice, params, seed, horizon, frame);
    let mut keyed: Vec<(f64, u8, usize, EventKind)> = Vec::new();
    for kind in ClockKind::ALL {
        if clocks.rate(kind) <= 0.0 {
            continue;
        }
        for index in 0..clocks.count(kind) {
            let (site, dir) = clocks.split(kind, index);
            let Some(ev) = EventKind::clock_event(lattice, kind, site, dir) else {
                continue;
            };
            let mut cursor = None;
            let mut t = 0.0;
            while let Some(next) = clocks.next_after(kind, index, &mut cursor, t) {
                keyed.push((next, kind as u8, index, ev));
                t = next;
            }
        }
    }
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(EventStream {
        sites: lattice.site_count(),
        horizon,
        seed,
        events: keyed
            .into_iter()
            .map(|(time, _, _, kind)| Event { time, kind })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReplayOptions<'a> {
    /// Sites held in their initial state against death marks.
    pub clamped: Option<&'a [bool]>,
}

/// Folds the stream over `initial`, recording effective changes only.
pub fn evolve_harris(initial: &Configuration, stream: &EventStream) -> Result<Trajectory> {
    evolve_harris_with(initial, stream, ReplayOptions::default())
}

pub fn evolve_harris_with(
    initial: &Configuration,
    stream: &EventStream,
    opts: ReplayOptions<'_>,
) -> Result<Trajectory> {
    if initial.len() != stream.sites {
        return Err(Error::LatticeMismatch {
            expected: stream.sites,
            found: initial.len(),
        });
    }
    if let Some(c) = opts.clamped {
        if c.len() != stream.sites {
            return Err(Error::LatticeMismatch {
                expected: stream.sites,
                found: c.len(),
            });
        }
    }
    let mut states = initial.states().to_vec();
    let mut changes = Vec::new();
    for e in &stream.events {
        if let Some((site, from, to)) = apply_in_place(&mut states, &e.kind, opts.clamped) {
            changes.push(Change {
                time: e.time,
                site,
                from,
                to,
            });
        }
    }
    Ok(Trajectory::from_parts(initial.clone(), changes, stream.horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use proptest::prelude::*;

    fn ev(time: f64, kind: EventKind) -> Event {
        Event { time, kind }
    }

    #[test]
    fn zero_rates_give_an_empty_stream() {
        let l = Lattice::line(5, Boundary::Torus).unwrap();
        let p = Params {
            lambda: 0.0,
            alpha: 0.0,
            gamma: 0.0,
            forget: 0.0,
        };
        // forget = 0 is rejected by validation, so build the stream through the clocks directly
        let clocks = Clocks::new(&l, &p, 1, 10.0, None);
        for kind in ClockKind::ALL {
            assert_eq!(clocks.next_after(kind, 0, &mut None, 0.0), None);
        }
        let p = Params::new(0.0, 0.0).unwrap();
        let s = generate_events(&l, &p, 10.0, 1).unwrap();
        assert_eq!(s.count(ClockKind::Lambda) + s.count(ClockKind::Alpha), 0);
    }

    #[test]
    fn streams_are_deterministic_and_sorted() {
        let l = Lattice::new(2, &[4, 3], Boundary::Torus).unwrap();
        let p = Params::new(1.3, 0.7).unwrap().with_gamma(0.2).unwrap();
        let a = generate_events(&l, &p, 5.0, 99).unwrap();
        let b = generate_events(&l, &p, 5.0, 99).unwrap();
        assert_eq!(a, b);
        assert!(a.events.windows(2).all(|w| w[0].time < w[1].time));
        assert!(a.events.iter().all(|e| e.time > 0.0 && e.time <= 5.0));
        let c = generate_events(&l, &p, 5.0, 100).unwrap();
        assert_ne!(a, c);
        for e in a.events() {
            if let EventKind::Lambda { from, to } | EventKind::Alpha { from, to } = e.kind {
                assert!(l.neighbors(from).unwrap().contains(&to));
            }
        }
    }

    #[test]
    fn horizon_must_be_positive() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(1.0, 1.0).unwrap();
        assert!(generate_events(&l, &p, 0.0, 1).is_err());
        assert!(generate_events(&l, &p, -1.0, 1).is_err());
    }

    #[test]
    fn event_count_matches_poisson_mean() {
        // two directed edges at rate 1 plus two death clocks at rate 1, horizon 10: mean 40
        let l = Lattice::line(2, Boundary::Free).unwrap();
        let p = Params::new(1.0, 0.0).unwrap();
        let reps = 10_000u64;
        let total: usize = (0..reps)
            .map(|s| generate_events(&l, &p, 10.0, s).unwrap().len())
            .sum();
        let mean = total as f64 / reps as f64;
        let se = (40.0f64 / reps as f64).sqrt();
        assert!((mean - 40.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn rule_examples() {
        let c = Configuration::from_digits(&[2, 0]).unwrap();
        let after = apply_event(
            &c,
            &ev(0.1, EventKind::Lambda { from: Site(0), to: Site(1) }),
        );
        assert_eq!(after.digits(), vec![2, 1]);

        let c = Configuration::from_digits(&[1, 1]).unwrap();
        let after = apply_event(&c, &ev(0.1, EventKind::Alpha { from: Site(0), to: Site(1) }));
        assert_eq!(after, c);

        let c = Configuration::from_digits(&[0, 2]).unwrap();
        assert_eq!(apply_event(&c, &ev(0.1, EventKind::Death { at: Site(0) })), c);
        assert_eq!(
            apply_event(&c, &ev(0.1, EventKind::Gamma { at: Site(0) })).digits(),
            vec![2, 2]
        );
    }

    #[test]
    fn failed_preconditions_are_no_ops() {
        // all 9 endpoint state pairs x 4 event kinds
        for a in State::ALL {
            for b in State::ALL {
                let c = Configuration::new(vec![a, b]);
                let kinds = [
                    EventKind::Lambda { from: Site(0), to: Site(1) },
                    EventKind::Alpha { from: Site(0), to: Site(1) },
                    EventKind::Death { at: Site(1) },
                    EventKind::Gamma { at: Site(1) },
                ];
                for kind in kinds {
                    let fires = match kind {
                        EventKind::Lambda { .. } => a.is_informed() && b == State::Ignorant,
                        EventKind::Alpha { .. } => a == State::Adopter && b == State::Aware,
                        EventKind::Death { .. } => b.is_informed(),
                        EventKind::Gamma { .. } => b == State::Ignorant,
                    };
                    let after = apply_event(&c, &ev(1.0, kind));
                    assert_eq!(after != c, fires, "{a:?} {b:?} {kind:?}");
                    assert_eq!(after.get(Site(0)), a);
                }
            }
        }
    }

    #[test]
    fn hand_built_stream_replays() {
        let init = Configuration::from_digits(&[0, 2, 0, 1]).unwrap();
        let events = vec![
            ev(0.5, EventKind::Lambda { from: Site(1), to: Site(0) }),
            ev(0.7, EventKind::Death { at: Site(3) }),
            ev(0.9, EventKind::Lambda { from: Site(1), to: Site(2) }),
            ev(1.1, EventKind::Alpha { from: Site(1), to: Site(2) }),
        ];
        let stream = EventStream::new(4, 2.0, 0, events).unwrap();
        let traj = evolve_harris(&init, &stream).unwrap();
        assert_eq!(traj.final_config().digits(), vec![1, 2, 2, 0]);
        assert_eq!(traj.changes().len(), 4);

        let empty = EventStream::new(4, 2.0, 0, vec![]).unwrap();
        assert!(evolve_harris(&init, &empty).unwrap().changes().is_empty());
        assert!(matches!(
            evolve_harris(&Configuration::zeros(3), &empty),
            Err(Error::LatticeMismatch { .. })
        ));
    }

    #[test]
    fn clamped_sites_ignore_death() {
        let init = Configuration::from_digits(&[2, 2]).unwrap();
        let stream = EventStream::new(
            2,
            1.0,
            0,
            vec![ev(0.2, EventKind::Death { at: Site(0) }), ev(0.3, EventKind::Death { at: Site(1) })],
        )
        .unwrap();
        let mask = [true, false];
        let traj = evolve_harris_with(&init, &stream, ReplayOptions { clamped: Some(&mask) }).unwrap();
        assert_eq!(traj.final_config().digits(), vec![2, 0]);
    }

    #[test]
    fn rejects_unsorted_streams() {
        let e = vec![
            ev(0.5, EventKind::Death { at: Site(0) }),
            ev(0.4, EventKind::Death { at: Site(0) }),
        ];
        assert!(EventStream::new(1, 1.0, 0, e).is_err());
        assert!(EventStream::new(1, 1.0, 0, vec![ev(0.0, EventKind::Death { at: Site(0) })]).is_err());
        assert!(EventStream::new(1, 1.0, 0, vec![ev(0.5, EventKind::Death { at: Site(3) })]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn thinning_is_nested(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let l = Lattice::line(6, Boundary::Torus).unwrap();
            let p = Params::new(1.0, 2.0).unwrap().with_gamma(0.5).unwrap();
            let s = generate_events(&l, &p, 4.0, seed).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = s.thinned([lo, lo, 1.0, lo]);
            let large = s.thinned([hi, hi, 1.0, hi]);
            prop_assert!(small.len() <= large.len());
            prop_assert!(large.len() <= s.len());
            prop_assert!(small.events().iter().all(|e| large.events().contains(e)));
            prop_assert_eq!(small.count(ClockKind::Death), s.count(ClockKind::Death));
        }

        #[test]
        fn event_counts_grow_with_rates_under_thinning(seed in any::<u64>(), keep in 0.0f64..1.0) {
            // thinning a dominating stream can only remove events
            let l = Lattice::line(5, Boundary::Free).unwrap();
            let hi = Params::new(2.0, 3.0).unwrap().with_gamma(1.0).unwrap();
            let s = generate_events(&l, &hi, 3.0, seed).unwrap();
            for k in 0..4 {
                let mut mask = [1.0; 4];
                mask[k] = keep;
                prop_assert!(s.thinned(mask).len() <= s.len());
            }
        }
    }
}
