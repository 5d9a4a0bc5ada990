//! Parameter sweeps and noisy bisection for critical rates.
//!
//! Critical values here are finite-size proxies: the rate at which the
//! probability of surviving to the horizon on a finite lattice crosses a
//! threshold. They are not the infinite-volume critical points.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Configuration, Params};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Lattice};
use crate::observables::{estimate_survival, Mode, SurvivalEstimate};
use crate::rng::{derive_path, tag};

/// Everything except the rates: where and how survival is estimated.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    pub lattice: &'a Lattice,
    pub initial: &'a Configuration,
    pub horizon: f64,
    pub mode: Mode,
    pub replicates: u64,
    pub seed: u64,
}

/// Seed of the grid point `params`; equal rates give equal seeds.
pub fn grid_seed(seed: u64, params: &Params) -> u64 {
    derive_path(
        seed,
        &[
            tag::GRID,
            params.lambda.to_bits(),
            params.alpha.to_bits(),
            params.gamma.to_bits(),
            params.forget.to_bits(),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub mode: Mode,
    pub seed: u64,
    pub estimate: SurvivalEstimate,
}

/// One row per grid point in lexicographic `(lambda, alpha, gamma)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "lambda,alpha,gamma,mode,successes,replicates,estimate,ci_low,ci_high";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let e = &r.estimate;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.lambda,
                r.alpha,
                r.gamma,
                r.mode.as_str(),
                e.successes,
                e.replicates,
                e.estimate,
                e.ci_low,
                e.ci_high
            );
        }
        out
    }
}

fn sorted_axis(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Invalid(format!("sweep grid has no {name} values")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Estimates survival at every point of the product grid. `base` supplies
/// `forget`. Points and replicates run on the current rayon pool.
pub fn sweep(
    lambdas: &[f64],
    alphas: &[f64],
    gammas: &[f64],
    base: &Params,
    exp: &Experiment<'_>,
) -> Result<SweepTable> {
    let (ls, als, gs) = (
        sorted_axis("lambda", lambdas)?,
        sorted_axis("alpha", alphas)?,
        sorted_axis("gamma", gammas)?,
    );
    let mut points = Vec::with_capacity(ls.len() * als.len() * gs.len());
    for &lambda in &ls {
        for &alpha in &als {
            for &gamma in &gs {
                points.push(Params { lambda, alpha, gamma, forget: base.forget });
            }
        }
    }
    let rows = points
        .par_iter()
        .map(|p| {
            p.validate()?;
            let seed = grid_seed(exp.seed, p);
            let estimate = estimate_survival(exp.lattice, p, exp.initial, exp.horizon, exp.mode, exp.replicates, seed)?;
            Ok(SweepRow {
                lambda: p.lambda,
                alpha: p.alpha,
                gamma: p.gamma,
                mode: exp.mode,
                seed,
                estimate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Lambda,
    Alpha,
}

impl Axis {
    pub fn apply(self, params: &Params, value: f64) -> Result<Params> {
        match self {
            Axis::Lambda => params.with_lambda(value),
            Axis::Alpha => params.with_alpha(value),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Axis::Lambda),
            "alpha" => Ok(Axis::Alpha),
            _ => Err(Error::Invalid(format!("unknown axis '{s}'"))),
        }
    }
}

/// Replicate doublings tried on a midpoint whose interval contains the
/// threshold.
pub const MAX_DOUBLINGS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub low: f64,
    pub high: f64,
    pub midpoint: f64,
    pub replicates: u64,
    pub estimate: SurvivalEstimate,
    /// The interval still contained the threshold after all doublings.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub dim: usize,
    pub sides: Vec<usize>,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub axis: Axis,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub midpoint: f64,
    pub threshold: f64,
    pub tolerance: f64,
    pub fixed: Params,
    pub lattice: LatticeInfo,
    pub horizon: f64,
    pub mode: Mode,
    pub replicates: u64,
    pub seed: u64,
    pub low_estimate: SurvivalEstimate,
    pub high_estimate: SurvivalEstimate,
    /// Some midpoint decision was taken on an ambiguous estimate.
    pub flagged: bool,
    pub history: Vec<BisectionStep>,
}

fn point_seed(seed: u64, value: f64, replicates: u64) -> u64 {
    derive_path(seed, &[tag::GRID, value.to_bits(), replicates])
}

/// Bisection on `axis` until the bracket is at most `tolerance` wide. The
/// straddle `estimate(low) < threshold <= estimate(high)` holds at every step.
pub fn estimate_critical(
    axis: Axis,
    fixed: &Params,
    bracket: (f64, f64),
    threshold: f64,
    tolerance: f64,
    exp: &Experiment<'_>,
) -> Result<CriticalEstimate> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tolerance}")));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Invalid(format!("threshold must be a probability, got {threshold}")));
    }
    let (mut low, mut high) = bracket;
    if !(low < high) {
        return Err(Error::Bracket(format!("empty bracket ({low}, {high})")));
    }
    let eval = |value: f64, reps: u64| -> Result<SurvivalEstimate> {
        let p = axis.apply(fixed, value)?;
        estimate_survival(exp.lattice, &p, exp.initial, exp.horizon, exp.mode, reps, point_seed(exp.seed, value, reps))
    };
    let mut low_est = eval(low, exp.replicates)?;
    let mut high_est = eval(high, exp.replicates)?;
    if !(low_est.estimate < threshold) {
        return Err(Error::Bracket(format!(
            "survival {} at the low end {low} is not below {threshold}",
            low_est.estimate
        )));
    }
    if !(high_est.estimate > threshold) {
        return Err(Error::Bracket(format!(
            "survival {} at the high end {high} is not above {threshold}",
            high_est.estimate
        )));
    }
    let mut history = Vec::new();
    let mut flagged = false;
    while high - low > tolerance {
        let mid = 0.5 * (low + high);
        let mut reps = exp.replicates;
        let mut est = eval(mid, reps)?;
        let contains = |e: &SurvivalEstimate| e.ci_low <= threshold && threshold <= e.ci_high;
        for _ in 0..MAX_DOUBLINGS {
            if !contains(&est) {
                break;
            }
            reps *= 2;
            est = eval(mid, reps)?;
        }
        let ambiguous = contains(&est);
        flagged |= ambiguous;
        history.push(BisectionStep {
            low,
            high,
            midpoint: mid,
            replicates: reps,
            estimate: est,
            ambiguous,
        });
        if est.estimate < threshold {
            low = mid;
            low_est = est;
        } else {
            high = mid;
            high_est = est;
        }
    }
    Ok(CriticalEstimate {
        axis,
        bracket_low: low,
        bracket_high: high,
        midpoint: 0.5 * (low + high),
        threshold,
        tolerance,
        fixed: *fixed,
        lattice: LatticeInfo {
            dim: exp.lattice.dim(),
            sides: exp.lattice.sides().to_vec(),
            boundary: exp.lattice.boundary(),
        },
        horizon: exp.horizon,
        mode: exp.mode,
        replicates: exp.replicates,
        seed: exp.seed,
        low_estimate: low_est,
        high_estimate: high_est,
        flagged,
        history,
    })
}
