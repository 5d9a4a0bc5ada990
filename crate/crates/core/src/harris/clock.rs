//! Per-entity Poisson clocks over chunked, counter-based substreams.
//!
//! Time is cut into chunks `(k c, (k + 1) c]` with `c = CHUNK`. The arrivals of
//! clock `e` in chunk `k` are generated from the substream keyed by
//! `(seed, kind, site key, direction, k)` by accumulating exponential gaps from
//! `k c`. Any chunk can therefore be produced on its own, which is what lets
//! the lazy engine skip clocks whose source site is idle and still reproduce
//! the eager stream draw for draw.

use crate::dynamics::Params;
use crate::lattice::{Lattice, Site};
use crate::rng::{derive, tag, CounterRng};

/// Chunk length of the clock substreams. Part of the reproducibility contract.
pub const CHUNK: f64 = 1.0;

/// The four families of Poisson clocks. The declaration order is the
/// tie-break order for events sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClockKind {
    Lambda = 0,
    Alpha = 1,
    Death = 2,
    Gamma = 3,
}

impl ClockKind {
    pub const ALL: [ClockKind; 4] = [
        ClockKind::Lambda,
        ClockKind::Alpha,
        ClockKind::Death,
        ClockKind::Gamma,
    ];

    fn tag(self) -> u64 {
        match self {
            ClockKind::Lambda => tag::LAMBDA,
            ClockKind::Alpha => tag::ALPHA,
            ClockKind::Death => tag::DEATH,
            ClockKind::Gamma => tag::GAMMA,
        }
    }

    pub fn is_arrow(self) -> bool {
        matches!(self, ClockKind::Lambda | ClockKind::Alpha)
    }

    pub(crate) fn from_index(i: u8) -> ClockKind {
        ClockKind::ALL[i as usize]
    }
}

/// Embeds a local lattice into a larger space-time realization: `site_keys[i]`
/// names the global site that local site `i` stands for, and local time `s`
/// corresponds to global time `s + time_offset`. Two runs whose frames map to
/// the same global site and time see the same Poisson marks there.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub site_keys: Vec<u64>,
    pub time_offset: f64,
}

impl Frame {
    pub fn identity(sites: usize) -> Self {
        Self {
            site_keys: (0..sites as u64).collect(),
            time_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cursor {
    chunk: i64,
    rng: CounterRng,
    /// Global time of the last arrival drawn in this chunk (or the chunk start).
    time: f64,
}

pub(crate) struct Clocks<'a> {
    lattice: &'a Lattice,
    seed: u64,
    rates: [f64; 4],
    site_keys: Option<&'a [u64]>,
    time_offset: f64,
    horizon: f64,
}

impl<'a> Clocks<'a> {
    pub fn new(
        lattice: &'a Lattice,
        params: &Params,
        seed: u64,
        horizon: f64,
        frame: Option<&'a Frame>,
    ) -> Self {
        Self {
            lattice,
            seed,
            rates: [params.lambda, params.alpha, params.forget, params.gamma],
            site_keys: frame.map(|f| f.site_keys.as_slice()),
            time_offset: frame.map_or(0.0, |f| f.time_offset),
            horizon,
        }
    }

    #[inline]
    pub fn rate(&self, kind: ClockKind) -> f64 {
        self.rates[kind as usize]
    }

    /// Number of clocks of a kind; arrow clocks are indexed `site * 2d + dir`.
    pub fn count(&self, kind: ClockKind) -> usize {
        if kind.is_arrow() {
            self.lattice.site_count() * self.lattice.directions()
        } else {
            self.lattice.site_count()
        }
    }

    #[inline]
    pub fn split(&self, kind: ClockKind, index: usize) -> (Site, usize) {
        if kind.is_arrow() {
            let dirs = self.lattice.directions();
            (Site(index / dirs), index % dirs)
        } else {
            (Site(index), 0)
        }
    }

    fn chunk_key(&self, kind: ClockKind, index: usize, chunk: i64) -> u64 {
        let (site, dir) = self.split(kind, index);
        let site_key = self.site_keys.map_or(site.0 as u64, |k| k[site.0]);
        let mut key = derive(self.seed, kind.tag());
        key = derive(key, site_key);
        key = derive(key, dir as u64);
        derive(key, chunk as u64)
    }

    fn start(&self, kind: ClockKind, index: usize, chunk: i64) -> Cursor {
        Cursor {
            chunk,
            rng: CounterRng::new(self.chunk_key(kind, index, chunk)),
            time: chunk as f64 * CHUNK,
        }
    }

    /// First arrival of a clock strictly after local time `after`, or `None`
    /// if there is none up to the horizon. Successive calls must not move
    /// `after` backwards past an arrival already returned.
    pub fn next_after(
        &self,
        kind: ClockKind,
        index: usize,
        cursor: &mut Option<Cursor>,
        after: f64,
    ) -> Option<f64> {
        let rate = self.rate(kind);
        if rate <= 0.0 {
            return None;
        }
        let global_after = after + self.time_offset;
        let global_end = self.horizon + self.time_offset;
        let target = (global_after / CHUNK).floor() as i64;
        let cur = match cursor {
            Some(c) if c.chunk >= target => c,
            _ => cursor.insert(self.start(kind, index, target)),
        };
        loop {
            let t = cur.time + cur.rng.next_exp(rate);
            if t > (cur.chunk + 1) as f64 * CHUNK {
                let next = cur.chunk + 1;
                *cur = self.start(kind, index, next);
                if cur.time >= global_end {
                    return None;
                }
                continue;
            }
            cur.time = t;
            if t > global_end {
                return None;
            }
            if t > global_after {
                return Some(t - self.time_offset);
            }
        }
    }
}
