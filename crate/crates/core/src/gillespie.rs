//! Direct-method stochastic simulation, the independent sampler used to
//! cross-check the graphical construction in distribution.
//!
//! Per-site total rates live in a binary sum tree. After a jump only the
//! jumped site and its neighbors are recomputed, since rates depend on the
//! nearest-neighbor configuration alone.

use crate::dynamics::{channels, counts_in, site_rate, Configuration, Params, State};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::rng::{tag, CounterRng};
use crate::trajectory::{Change, Trajectory};

#[derive(Debug, Clone, Copy, Default)]
pub struct GillespieOptions {
    /// Recompute the total rate from scratch after every jump and assert it
    /// agrees with the incremental tree. Slow; for validation.
    pub verify_rates: bool,
}

/// Complete binary tree of partial sums over the leaves.
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(values: &[f64]) -> Self {
        let leaves = values.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + values.len()].copy_from_slice(values);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = v;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u` in `[0, total)`.
    fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

pub fn evolve_gillespie(
    lattice: &Lattice,
    params: &Params,
    initial: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    evolve_gillespie_with(lattice, params, initial, horizon, seed, GillespieOptions::default())
}

pub fn evolve_gillespie_with(
    lattice: &Lattice,
    params: &Params,
    initial: &Configuration,
    horizon: f64,
    seed: u64,
    opts: GillespieOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidTime(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    params.validate()?;
    initial.check_len(lattice)?;
    let mut states = initial.states().to_vec();
    let rates: Vec<f64> = lattice
        .sites()
        .map(|x| site_rate(lattice, &states, x, params))
        .collect();
    let mut tree = SumTree::new(&rates);
    let mut rng = CounterRng::from_path(seed, &[tag::GILLESPIE]);
    let mut changes = Vec::new();
    let mut t = 0.0;
    loop {
        let total = tree.total();
        if total <= 0.0 {
            break;
        }
        t += rng.next_exp(total);
        if t > horizon {
            break;
        }
        let u = rng.next_f64() * total;
        let site = Site(tree.find(u).min(lattice.site_count() - 1));
        let (n1, n2) = counts_in(lattice, &states, site);
        let from = states[site.0];
        let chans = channels(from, n1, n2, params);
        let site_total: f64 = chans.iter().map(|c| c.1).sum();
        // a zero leaf can only be hit through rounding at the top of the range
        let Some(&(mut to, _)) = chans.last() else {
            continue;
        };
        let mut v = rng.next_f64() * site_total;
        for &(target, rate) in &chans {
            if v < rate {
                to = target;
                break;
            }
            v -= rate;
        }
        debug_assert!(chans.iter().any(|c| c.0 == to && c.1 > 0.0));
        states[site.0] = to;
        changes.push(Change {
            time: t,
            site,
            from,
            to,
        });
        tree.set(site.0, site_rate(lattice, &states, site, params));
        for (_, y) in lattice.neighbors_by_direction(site) {
            tree.set(y.0, site_rate(lattice, &states, y, params));
        }
        if opts.verify_rates {
            let full: f64 = lattice
                .sites()
                .map(|x| site_rate(lattice, &states, x, params))
                .sum();
            assert!(
                (full - tree.total()).abs() <= 1e-9 * full.max(1.0),
                "incremental total {} drifted from {full}",
                tree.total()
            );
        }
    }
    Ok(Trajectory::from_parts(initial.clone(), changes, horizon))
}

/// Number of non-ignorant sites, used by the pure-death checks.
pub fn informed_count(states: &[State]) -> usize {
    states.iter().filter(|s| s.is_informed()).count()
}
