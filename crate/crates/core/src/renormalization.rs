//! Block constructions comparing the process with oriented site percolation.
//!
//! Macroscopic sites live on `L0 = {(x, n) : x + n even, n >= 0}` with edges
//! `(x, n) -> (x +- 1, n + 1)`; block `(x, n)` sits at microscopic offset
//! `(2 x L, n T)`.
//!
//! * Extinction blocks: the box `[-2L, 2L]^d x [0, 2T]` under the maximal
//!   boundary condition (faces clamped to 2, everything 2 at time 0) is open
//!   when the inner box `[-L, L]^d x [T, 2T]` never holds an adopter. By the
//!   alpha coupling order the maximal boundary dominates every other one, so
//!   an open verdict holds for all boundary states.
//! * Survival blocks (d = 1): with `I_x = 2 x L + [-L, L]` and `k = floor(sqrt L)`,
//!   `(x, n)` is open when at time `n T` the interval `I_x` has no aware site
//!   and at least `k` adopters, and the same holds for `I_{x-1}` and
//!   `I_{x+1}` at time `(n + 1) T`.
//!
//! The block time `T` is a free experiment parameter.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Configuration, Params, State};
use crate::error::{Error, Result};
use crate::harris::{Engine, EngineOptions, Frame};
use crate::lattice::{Boundary, Lattice, Site};
use crate::observables::SurvivalEstimate;
use crate::rng::{derive, derive_path, tag};
use crate::trajectory::Trajectory;

/// Key of the global site with integer coordinates `coords`, shared by every
/// block that contains it.
pub fn global_site_key(coords: &[i64]) -> u64 {
    coords.iter().fold(0x5eed, |k, &c| derive(k, c as u64))
}

fn check_block_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParams(format!("block time must be positive, got {t}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionBlockSpec {
    pub l: usize,
    pub t: f64,
    pub dim: usize,
}

impl ExtinctionBlockSpec {
    pub fn new(l: usize, t: f64, dim: usize) -> Result<Self> {
        if l == 0 || dim == 0 {
            return Err(Error::InvalidParams("block needs L >= 1 and d >= 1".into()));
        }
        check_block_time(t)?;
        Ok(Self { l, t, dim })
    }

    /// Side of the outer box, `4L + 1`.
    pub fn side(&self) -> usize {
        4 * self.l + 1
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.dim, &vec![self.side(); self.dim], Boundary::Free)
    }

    /// Box coordinates of a site, centered so that they range over `[-2L, 2L]`.
    pub fn centered(&self, lattice: &Lattice, site: Site) -> Vec<i64> {
        let two_l = 2 * self.l as i64;
        lattice
            .coords(site)
            .expect("site of the block lattice")
            .into_iter()
            .map(|c| c as i64 - two_l)
            .collect()
    }

    /// Spatial faces `|x_i| = 2L`, held at 2 for all time.
    pub fn face_mask(&self, lattice: &Lattice) -> Vec<bool> {
        let two_l = 2 * self.l as i64;
        lattice
            .sites()
            .map(|s| self.centered(lattice, s).iter().any(|c| c.abs() == two_l))
            .collect()
    }

    /// Sites of the inspected box `[-L, L]^d`.
    pub fn inner_mask(&self, lattice: &Lattice) -> Vec<bool> {
        let l = self.l as i64;
        lattice
            .sites()
            .map(|s| self.centered(lattice, s).iter().all(|c| c.abs() <= l))
            .collect()
    }

    /// Inspected time window `[T, 2T]`.
    pub fn window(&self) -> (f64, f64) {
        (self.t, 2.0 * self.t)
    }
}

/// Classifies one extinction block under the maximal boundary condition.
pub fn classify_extinction_block(params: &Params, bspec: &ExtinctionBlockSpec, seed: u64) -> Result<bool> {
    classify_extinction_block_in(params, bspec, seed, None)
}

/// As [`classify_extinction_block`], reading the marks of a larger
/// realization through `frame`.
pub fn classify_extinction_block_in(
    params: &Params,
    bspec: &ExtinctionBlockSpec,
    seed: u64,
    frame: Option<&Frame>,
) -> Result<bool> {
    if params.gamma != 0.0 {
        return Err(Error::InvalidParams(
            "extinction blocks rely on the monotone coupling and need gamma = 0".into(),
        ));
    }
    let lattice = bspec.lattice()?;
    let faces = bspec.face_mask(&lattice);
    let inner = bspec.inner_mask(&lattice);
    let initial = Configuration::uniform(lattice.site_count(), State::Adopter);
    let (t1, t2) = bspec.window();
    let opts = EngineOptions {
        clamped: Some(&faces),
        frame,
        record: false,
    };
    let mut engine = Engine::new(&lattice, params, &initial, t2, seed, opts)?;
    engine.run_until(t1);
    let adopter_inside = |states: &[State]| {
        states
            .iter()
            .zip(&inner)
            .any(|(&s, &i)| i && s == State::Adopter)
    };
    if adopter_inside(engine.states()) {
        return Ok(false);
    }
    let mut open = true;
    engine.advance(t2, |c, _, _| {
        if c.to == State::Adopter && inner[c.site.0] {
            open = false;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    Ok(open)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalBlockSpec {
    pub l: usize,
    pub t: f64,
    pub k: usize,
}

/// Configuration of `I` at the start of an independently sampled survival
/// block; the rest of `B` starts ignorant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivalOrigin {
    /// Every site of `I` an adopter.
    FullInterval,
    /// `k` consecutive adopters at the center of `I`.
    MinimalSeed,
    /// States of all `8L - 1` sites of `B`, left to right.
    Explicit(Vec<u8>),
}

impl SurvivalBlockSpec {
    pub fn new(l: usize, t: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParams("block needs L >= 1".into()));
        }
        check_block_time(t)?;
        let mut k = (l as f64).sqrt() as usize;
        // guard against rounding of the square root
        while k * k > l {
            k -= 1;
        }
        while (k + 1) * (k + 1) <= l {
            k += 1;
        }
        Ok(Self { l, t, k })
    }

    /// Sites of `B = (-4L, 4L)`.
    pub fn block_sites(&self) -> usize {
        8 * self.l - 1
    }

    /// Coordinate range of `I_x`.
    pub fn interval(&self, x: i64) -> (i64, i64) {
        let (c, l) = (2 * x * self.l as i64, self.l as i64);
        (c - l, c + l)
    }

    pub fn origin_config(&self, origin: &SurvivalOrigin) -> Result<Configuration> {
        let n = self.block_sites();
        let centre = 4 * self.l - 1;
        match origin {
            SurvivalOrigin::FullInterval => {
                let mut c = Configuration::zeros(n);
                for i in centre - self.l..=centre + self.l {
                    c.set(Site(i), State::Adopter);
                }
                Ok(c)
            }
            SurvivalOrigin::MinimalSeed => {
                let mut c = Configuration::zeros(n);
                let start = centre - (self.k.max(1) - 1) / 2;
                for i in start..start + self.k.max(1) {
                    c.set(Site(i), State::Adopter);
                }
                Ok(c)
            }
            SurvivalOrigin::Explicit(d) => {
                let c = Configuration::from_digits(d)?;
                if c.len() != n {
                    return Err(Error::LatticeMismatch {
                        expected: n,
                        found: c.len(),
                    });
                }
                Ok(c)
            }
        }
    }
}

/// No aware site and at least `k` adopters among `states[lo..=hi]`.
fn interval_ok(states: &[State], lo: usize, hi: usize, k: usize) -> bool {
    let mut adopters = 0;
    for &s in &states[lo..=hi] {
        match s {
            State::Aware => return false,
            State::Adopter => adopters += 1,
            State::Ignorant => {}
        }
    }
    adopters >= k
}

/// Survival-block condition for `(x, n)` on a 1-d path whose site 0 has
/// coordinate `first_coord`.
pub fn block_open_on_path(
    traj: &Trajectory,
    first_coord: i64,
    bspec: &SurvivalBlockSpec,
    x: i64,
    n: u64,
) -> Result<bool> {
    let (t0, t1) = (n as f64 * bspec.t, (n + 1) as f64 * bspec.t);
    if t1 > traj.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidTime(format!(
            "block ({x}, {n}) needs the path up to {t1}, horizon is {}",
            traj.horizon()
        )));
    }
    let now = traj.config_at(t0)?;
    let next = traj.config_at(t1.min(traj.horizon()))?;
    survival_condition(now.states(), next.states(), first_coord, bspec, x)
}

fn survival_condition(
    now: &[State],
    next: &[State],
    first_coord: i64,
    bspec: &SurvivalBlockSpec,
    x: i64,
) -> Result<bool> {
    let last_coord = first_coord + now.len() as i64 - 1;
    let index = |x: i64| -> Result<(usize, usize)> {
        let (lo, hi) = bspec.interval(x);
        if lo < first_coord || hi > last_coord {
            return Err(Error::Invalid(format!(
                "interval [{lo}, {hi}] not covered by the path on [{first_coord}, {last_coord}]"
            )));
        }
        Ok(((lo - first_coord) as usize, (hi - first_coord) as usize))
    };
    let (c0, c1) = index(x)?;
    let (l0, l1) = index(x - 1)?;
    let (r0, r1) = index(x + 1)?;
    Ok(interval_ok(now, c0, c1, bspec.k)
        && interval_ok(next, l0, l1, bspec.k)
        && interval_ok(next, r0, r1, bspec.k))
}

/// Simulates `B` over `[0, T]` from `origin` and classifies the block.
pub fn classify_survival_block(
    params: &Params,
    bspec: &SurvivalBlockSpec,
    origin: &SurvivalOrigin,
    seed: u64,
) -> Result<bool> {
    let lattice = Lattice::line(bspec.block_sites(), Boundary::Free)?;
    let initial = bspec.origin_config(origin)?;
    let first = -(4 * bspec.l as i64) + 1;
    let mut engine = Engine::new(&lattice, params, &initial, bspec.t, seed, EngineOptions::default())?;
    engine.run_to_horizon();
    survival_condition(initial.states(), engine.states(), first, bspec, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlockSpec {
    Extinction(ExtinctionBlockSpec),
    Survival {
        #[serde(flatten)]
        spec: SurvivalBlockSpec,
        origin: SurvivalOrigin,
    },
}

/// How the blocks of one field are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Each block from its own derived seed: marginal open probabilities only.
    #[default]
    Independent,
    /// All blocks read one space-time realization, so overlapping blocks are
    /// dependent as in the percolation comparison.
    Shared,
}

/// Open/closed states on the window `x_min <= x < x_min + width`,
/// `0 <= n < height`; only sites with `x + n` even carry a value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockField {
    x_min: i64,
    width: usize,
    height: usize,
    cells: Vec<Option<bool>>,
}

impl BlockField {
    /// Window centered on `x = 0`.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("block window must be positive".into()));
        }
        Ok(Self {
            x_min: -((width as i64 - 1) / 2),
            width,
            height,
            cells: vec![None; width * height],
        })
    }

    pub fn x_min(&self) -> i64 {
        self.x_min
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Sites of `L0` inside the window, row by row.
    pub fn sites(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        (0..self.height as u64).flat_map(move |n| {
            (self.x_min..self.x_min + self.width as i64)
                .filter(move |x| (x + n as i64).rem_euclid(2) == 0)
                .map(move |x| (x, n))
        })
    }

    fn slot(&self, x: i64, n: u64) -> Option<usize> {
        let dx = x - self.x_min;
        if dx < 0 || dx >= self.width as i64 || n >= self.height as u64 || (x + n as i64).rem_euclid(2) != 0 {
            return None;
        }
        Some(n as usize * self.width + dx as usize)
    }

    /// `None` outside the window or off `L0`, or when unclassified.
    pub fn get(&self, x: i64, n: u64) -> Option<bool> {
        self.slot(x, n).and_then(|i| self.cells[i])
    }

    pub fn is_open(&self, x: i64, n: u64) -> bool {
        self.get(x, n) == Some(true)
    }

    pub fn set(&mut self, x: i64, n: u64, open: bool) -> Result<()> {
        let i = self
            .slot(x, n)
            .ok_or_else(|| Error::Invalid(format!("({x}, {n}) is not a window site of L0")))?;
        self.cells[i] = Some(open);
        Ok(())
    }

    pub fn open_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Some(true)).count()
    }

    pub fn classified(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Header `x,n,open` and one row per site, open written as 0/1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,n,open\n");
        for (x, n) in self.sites() {
            if let Some(v) = self.get(x, n) {
                let _ = writeln!(out, "{x},{n},{}", u8::from(v));
            }
        }
        out
    }
}

/// Highest row reached by oriented open paths, `-1` when no origin is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reach {
    pub max_row: i64,
    pub reached_top: bool,
}

/// Breadth-first search over open sites along `(x, n) -> (x +- 1, n + 1)`.
pub fn oriented_reachability(field: &BlockField, origins: &[(i64, u64)]) -> Reach {
    let mut seen = vec![false; field.cells.len()];
    let mut queue = VecDeque::new();
    for &(x, n) in origins {
        if let Some(i) = field.slot(x, n).filter(|&i| field.cells[i] == Some(true)) {
            if !seen[i] {
                seen[i] = true;
                queue.push_back((x, n));
            }
        }
    }
    let mut max_row = -1;
    while let Some((x, n)) = queue.pop_front() {
        max_row = max_row.max(n as i64);
        for y in [x - 1, x + 1] {
            if let Some(i) = field.slot(y, n + 1).filter(|&i| field.cells[i] == Some(true)) {
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back((y, n + 1));
                }
            }
        }
    }
    Reach {
        max_row,
        reached_top: max_row == field.height as i64 - 1,
    }
}

/// Row-0 sites of the window, the default origins.
pub fn bottom_row(field: &BlockField) -> Vec<(i64, u64)> {
    field.sites().take_while(|&(_, n)| n == 0).collect()
}

/// Sampled fields and the pooled open fraction over all their blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    pub fields: Vec<BlockField>,
    pub open: SurvivalEstimate,
}

/// Seed of block `(x, n)` in field `r`.
pub fn block_seed(seed: u64, r: u64, x: i64, n: u64) -> u64 {
    derive_path(seed, &[tag::BLOCK, r, x as u64, n])
}

/// Samples `replicates` fields over the window. Fields are independent of one
/// another; see [`Sampling`] for the dependence within a field.
pub fn sample_block_field(
    params: &Params,
    bspec: &BlockSpec,
    window: (usize, usize),
    replicates: u64,
    sampling: Sampling,
    seed: u64,
) -> Result<BlockSample> {
    params.validate()?;
    if replicates == 0 {
        return Err(Error::Invalid("replicates must be >= 1".into()));
    }
    let template = BlockField::new(window.0, window.1)?;
    let fields = (0..replicates)
        .into_par_iter()
        .map(|r| match sampling {
            Sampling::Independent => independent_field(params, bspec, &template, seed, r),
            Sampling::Shared => shared_field(params, bspec, &template, derive_path(seed, &[tag::BLOCK, r])),
        })
        .collect::<Result<Vec<_>>>()?;
    let open: usize = fields.iter().map(BlockField::open_count).sum();
    let total: usize = fields.iter().map(BlockField::classified).sum();
    Ok(BlockSample {
        open: SurvivalEstimate::from_counts(open as u64, total as u64)?,
        fields,
    })
}

fn independent_field(
    params: &Params,
    bspec: &BlockSpec,
    template: &BlockField,
    seed: u64,
    r: u64,
) -> Result<BlockField> {
    let mut field = template.clone();
    let sites: Vec<_> = field.sites().collect();
    for (x, n) in sites {
        let s = block_seed(seed, r, x, n);
        let open = match bspec {
            BlockSpec::Extinction(b) => classify_extinction_block(params, b, s)?,
            BlockSpec::Survival { spec, origin } => classify_survival_block(params, spec, origin, s)?,
        };
        field.set(x, n, open)?;
    }
    Ok(field)
}

fn shared_field(params: &Params, bspec: &BlockSpec, template: &BlockField, seed: u64) -> Result<BlockField> {
    let mut field = template.clone();
    let sites: Vec<_> = field.sites().collect();
    match bspec {
        BlockSpec::Extinction(b) => {
            let lattice = b.lattice()?;
            let two_l = 2 * b.l as i64;
            for (x, n) in sites {
                // the block is shifted by 2xL along the first axis
                let keys = lattice
                    .sites()
                    .map(|s| {
                        let mut c = b.centered(&lattice, s);
                        c[0] += x * two_l;
                        global_site_key(&c)
                    })
                    .collect();
                let frame = Frame {
                    site_keys: keys,
                    time_offset: n as f64 * b.t,
                };
                field.set(x, n, classify_extinction_block_in(params, b, seed, Some(&frame))?)?;
            }
        }
        BlockSpec::Survival { spec, origin } => {
            let l = spec.l as i64;
            let x_max = field.x_min + field.width as i64 - 1;
            let first = 2 * field.x_min * l - 4 * l + 1;
            let last = 2 * x_max * l + 4 * l - 1;
            let sites_n = (last - first + 1) as usize;
            let lattice = Lattice::line(sites_n, Boundary::Free)?;
            // the origin pattern of I is repeated in every row-0 block
            let pattern = spec.origin_config(origin)?;
            let mut initial = Configuration::zeros(sites_n);
            for (x, _) in bottom_row(&field) {
                let (lo, hi) = spec.interval(x);
                for c in lo..=hi {
                    let s = pattern.get(Site((c - 2 * x * l + 4 * l - 1) as usize));
                    initial.set(Site((c - first) as usize), s);
                }
            }
            let horizon = field.height as f64 * spec.t;
            let frame = Frame {
                site_keys: (first..=last).map(|c| global_site_key(&[c])).collect(),
                time_offset: 0.0,
            };
            let opts = EngineOptions {
                frame: Some(&frame),
                ..EngineOptions::default()
            };
            let mut engine = Engine::new(&lattice, params, &initial, horizon, seed, opts)?;
            let mut snapshots = vec![initial.into_states()];
            for row in 1..=field.height {
                engine.run_until(row as f64 * spec.t);
                snapshots.push(engine.states().to_vec());
            }
            for (x, n) in sites {
                let n_ = n as usize;
                let open = survival_condition(&snapshots[n_], &snapshots[n_ + 1], first, spec, x)?;
                field.set(x, n, open)?;
            }
        }
    }
    Ok(field)
}
