//! Lazy event-driven replay of the graphical construction.
//!
//! Only clocks whose source site can make their event effective are kept in
//! the queue: arrows leaving an informed site (lambda) or an adopter (alpha),
//! deaths of informed sites, and gamma marks of ignorant sites. A clock that
//! goes idle is dropped and, when it becomes live again at time `t`, resumes
//! at its first arrival after `t`. Arrivals skipped this way are exactly the
//! ones that would have been no-ops, so the path equals the eager replay of
//! [`generate_events`](super::generate_events) for the same seed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::ControlFlow;

use super::clock::{ClockKind, Clocks, Cursor, Frame};
use super::{apply_in_place, check_horizon, EventKind};
use crate::dynamics::{Configuration, Params, State};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::trajectory::{Change, Trajectory};

#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions<'a> {
    /// Sites held in their initial state against death marks.
    pub clamped: Option<&'a [bool]>,
    /// Embedding into a larger realization; identity when `None`.
    pub frame: Option<&'a Frame>,
    /// Keep the list of changes for [`Engine::into_trajectory`].
    pub record: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    kind: u8,
    index: u32,
}

impl Eq for Pending {}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Outcome of [`Engine::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    /// All events up to the requested time were processed.
    Reached,
    /// The observer stopped the run right after the change at this time.
    Stopped(f64),
}

pub struct Engine<'a> {
    lattice: &'a Lattice,
    clocks: Clocks<'a>,
    clamped: Option<&'a [bool]>,
    horizon: f64,
    initial: Configuration,
    states: Vec<State>,
    counts: [usize; 3],
    offsets: [usize; 4],
    cursors: Vec<Option<Cursor>>,
    scheduled: Vec<bool>,
    heap: BinaryHeap<Pending>,
    now: f64,
    record: bool,
    changes: Vec<Change>,
    processed: u64,
}

impl<'a> Engine<'a> {
    pub fn new(
        lattice: &'a Lattice,
        params: &Params,
        initial: &Configuration,
        horizon: f64,
        seed: u64,
        opts: EngineOptions<'a>,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        params.validate()?;
        initial.check_len(lattice)?;
        let n = lattice.site_count();
        for len in [opts.clamped.map(<[bool]>::len), opts.frame.map(|f| f.site_keys.len())]
            .into_iter()
            .flatten()
        {
            if len != n {
                return Err(Error::LatticeMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let clocks = Clocks::new(lattice, params, seed, horizon, opts.frame);
        let mut offsets = [0usize; 4];
        let mut total = 0;
        for kind in ClockKind::ALL {
            offsets[kind as usize] = total;
            total += clocks.count(kind);
        }
        let mut engine = Self {
            lattice,
            clocks,
            clamped: opts.clamped,
            horizon,
            initial: initial.clone(),
            states: initial.states().to_vec(),
            counts: initial.counts(),
            offsets,
            cursors: vec![None; total],
            scheduled: vec![false; total],
            heap: BinaryHeap::new(),
            now: 0.0,
            record: opts.record,
            changes: Vec::new(),
            processed: 0,
        };
        for site in lattice.sites() {
            engine.wake(site, 0.0);
        }
        Ok(engine)
    }

    /// Convenience: run to the horizon and return the full path.
    pub fn simulate(
        lattice: &'a Lattice,
        params: &Params,
        initial: &Configuration,
        horizon: f64,
        seed: u64,
    ) -> Result<Trajectory> {
        let mut engine = Self::new(
            lattice,
            params,
            initial,
            horizon,
            seed,
            EngineOptions {
                record: true,
                ..Default::default()
            },
        )?;
        engine.run_to_horizon();
        Ok(engine.into_trajectory())
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn config(&self) -> Configuration {
        Configuration::new(self.states.clone())
    }

    /// Counts of sites in states 0, 1 and 2.
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// Time of the last processed event, or the time passed to the last
    /// completed [`advance`](Self::advance).
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of clock arrivals popped so far, effective or not.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// True once no clock can fire again before the horizon.
    pub fn is_quiescent(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory::from_parts(self.initial, self.changes, self.horizon)
    }

    #[inline]
    fn id(&self, kind: ClockKind, index: usize) -> usize {
        self.offsets[kind as usize] + index
    }

    #[inline]
    fn live(&self, kind: ClockKind, index: usize) -> bool {
        if self.clocks.rate(kind) <= 0.0 {
            return false;
        }
        let (site, dir) = self.clocks.split(kind, index);
        let s = self.states[site.0];
        match kind {
            ClockKind::Lambda => s.is_informed() && self.lattice.neighbor(site, dir).is_some(),
            ClockKind::Alpha => s == State::Adopter && self.lattice.neighbor(site, dir).is_some(),
            ClockKind::Death => s.is_informed() && !self.clamped.is_some_and(|c| c[site.0]),
            ClockKind::Gamma => s == State::Ignorant,
        }
    }

    fn schedule(&mut self, kind: ClockKind, index: usize, after: f64) {
        let id = self.id(kind, index);
        // An exhausted clock stays marked as scheduled: it has nothing left.
        self.scheduled[id] = true;
        if let Some(time) = self.clocks.next_after(kind, index, &mut self.cursors[id], after) {
            self.heap.push(Pending {
                time,
                kind: kind as u8,
                index: index as u32,
            });
        }
    }

    fn wake(&mut self, site: Site, now: f64) {
        let dirs = self.lattice.directions();
        for kind in ClockKind::ALL {
            let (lo, hi) = if kind.is_arrow() {
                (site.0 * dirs, (site.0 + 1) * dirs)
            } else {
                (site.0, site.0 + 1)
            };
            for index in lo..hi {
                if !self.scheduled[self.id(kind, index)] && self.live(kind, index) {
                    self.schedule(kind, index, now);
                }
            }
        }
    }

    pub fn run_to_horizon(&mut self) {
        self.run_until(self.horizon);
    }

    /// Processes every arrival up to `t` without observing changes.
    pub fn run_until(&mut self, t: f64) {
        self.advance(t, |_, _, _| ControlFlow::Continue(()));
    }

    /// Processes every arrival with time `<= until` (capped at the horizon).
    /// `observer` sees each effective change together with the updated states
    /// and counts, and may stop the run early.
    pub fn advance<F>(&mut self, until: f64, mut observer: F) -> Advance
    where
        F: FnMut(&Change, &[State], &[usize; 3]) -> ControlFlow<()>,
    {
        let until = until.min(self.horizon);
        while let Some(&top) = self.heap.peek() {
            if top.time > until {
                break;
            }
            self.heap.pop();
            self.processed += 1;
            let kind = ClockKind::from_index(top.kind);
            let index = top.index as usize;
            let id = self.id(kind, index);
            self.scheduled[id] = false;
            self.now = top.time;

            let (site, dir) = self.clocks.split(kind, index);
            let event = EventKind::clock_event(self.lattice, kind, site, dir)
                .expect("only clocks with a neighbor are scheduled");
            let effect = apply_in_place(&mut self.states, &event, self.clamped);

            if self.live(kind, index) {
                self.schedule(kind, index, top.time);
            }
            if let Some((site, from, to)) = effect {
                self.counts[from as usize] -= 1;
                self.counts[to as usize] += 1;
                self.wake(site, top.time);
                let change = Change {
                    time: top.time,
                    site,
                    from,
                    to,
                };
                if self.record {
                    self.changes.push(change);
                }
                if observer(&change, &self.states, &self.counts).is_break() {
                    return Advance::Stopped(top.time);
                }
            }
        }
        self.now = self.now.max(until);
        Advance::Reached
    }
}
