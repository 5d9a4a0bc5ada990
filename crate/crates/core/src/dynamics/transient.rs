//! Exact transient law of the process on tiny lattices by uniformization.

use crate::dynamics::{channels, counts_in, Configuration, Params};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    /// Largest admissible number of configurations, `3^sites`.
    pub max_states: usize,
    /// Bound on the total-variation truncation error.
    pub tolerance: f64,
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            max_states: 3usize.pow(12),
            tolerance: 1e-10,
        }
    }
}

/// Probability law over all `3^n` configurations, indexed by
/// [`Configuration::code`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    sites: usize,
    weights: Vec<f64>,
}

impl Distribution {
    pub fn point_mass(initial: &Configuration) -> Self {
        let mut weights = vec![0.0; 3usize.pow(initial.len() as u32)];
        weights[initial.code() as usize] = 1.0;
        Self {
            sites: initial.len(),
            weights,
        }
    }

    /// Wraps raw weights; `weights.len()` must be `3^sites`.
    pub fn from_weights(sites: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 3usize.pow(sites as u32) {
            return Err(Error::Invalid(format!(
                "expected {} weights, got {}",
                3usize.pow(sites as u32),
                weights.len()
            )));
        }
        Ok(Self { sites, weights })
    }

    /// Empirical law of a sample of configurations.
    pub fn empirical<'a>(sites: usize, sample: impl IntoIterator<Item = &'a Configuration>) -> Self {
        let mut weights = vec![0.0; 3usize.pow(sites as u32)];
        let mut n = 0usize;
        for c in sample {
            weights[c.code() as usize] += 1.0;
            n += 1;
        }
        if n > 0 {
            weights.iter_mut().for_each(|w| *w /= n as f64);
        }
        Self { sites, weights }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn prob(&self, config: &Configuration) -> f64 {
        if config.len() != self.sites {
            return 0.0;
        }
        self.weights[config.code() as usize]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Non-zero entries in code order.
    pub fn iter(&self) -> impl Iterator<Item = (Configuration, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(code, &w)| (Configuration::from_code(code as u64, self.sites), w))
    }

    pub fn tv_distance(&self, other: &Distribution) -> f64 {
        assert_eq!(self.sites, other.sites, "distributions over different lattices");
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Marginal law of the state of one site.
    pub fn marginal(&self, site: usize) -> [f64; 3] {
        let mut m = [0.0; 3];
        let div = 3u64.pow(site as u32);
        for (code, w) in self.weights.iter().enumerate() {
            m[((code as u64 / div) % 3) as usize] += w;
        }
        m
    }
}

/// Sparse generator: off-diagonal rates per state plus total exit rates.
struct Generator {
    rows: Vec<Vec<(u32, f64)>>,
    exit: Vec<f64>,
}

fn build_generator(lattice: &Lattice, params: &Params) -> Generator {
    let n = lattice.site_count();
    let size = 3usize.pow(n as u32);
    let pow3: Vec<u64> = (0..n).map(|i| 3u64.pow(i as u32)).collect();
    let mut rows = Vec::with_capacity(size);
    let mut exit = Vec::with_capacity(size);
    for code in 0..size as u64 {
        let config = Configuration::from_code(code, n);
        let states = config.states();
        let mut row = Vec::new();
        let mut out = 0.0;
        for x in lattice.sites() {
            let (n1, n2) = counts_in(lattice, states, x);
            let from = states[x.0];
            for (to, rate) in channels(from, n1, n2, params) {
                let delta = (to as i64 - from as i64) * pow3[x.0] as i64;
                row.push(((code as i64 + delta) as u32, rate));
                out += rate;
            }
        }
        rows.push(row);
        exit.push(out);
    }
    Generator { rows, exit }
}

/// Exact law of the configuration at time `t` under the default options.
pub fn exact_transient(
    lattice: &Lattice,
    params: &Params,
    initial: &Configuration,
    t: f64,
) -> Result<Distribution> {
    exact_transient_with(lattice, params, initial, t, TransientOptions::default())
}

/// Uniformization: with `q` the largest exit rate and `P = I + Q / q`,
/// `p(t) = sum_k Poisson(k; q t) * e_init P^k`. The series is cut once the
/// remaining Poisson mass is below `opts.tolerance`, then renormalized.
pub fn exact_transient_with(
    lattice: &Lattice,
    params: &Params,
    initial: &Configuration,
    t: f64,
    opts: TransientOptions,
) -> Result<Distribution> {
    params.validate()?;
    initial.check_len(lattice)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidTime(format!("t must be finite and >= 0, got {t}")));
    }
    let n = lattice.site_count();
    let size = u32::try_from(n)
        .ok()
        .and_then(|n| 3usize.checked_pow(n))
        .filter(|&s| s <= opts.max_states)
        .ok_or(Error::StateSpaceTooLarge {
            sites: n,
            cap: opts.max_states,
        })?;

    let init = Distribution::point_mass(initial);
    if t == 0.0 {
        return Ok(init);
    }
    let gen = build_generator(lattice, params);
    let q = gen.exit.iter().cloned().fold(0.0, f64::max);
    if q == 0.0 {
        return Ok(init);
    }
    let qt = q * t;
    let ln_qt = qt.ln();

    let mut v = init.weights;
    let mut next = vec![0.0; size];
    let mut acc = vec![0.0; size];
    let mut log_w = -qt;
    let mut used = 0.0;
    let mut k = 0u64;
    loop {
        let w = log_w.exp();
        used += w;
        if w > 0.0 {
            for (a, &p) in acc.iter_mut().zip(&v) {
                *a += w * p;
            }
        }
        let w_next = (log_w + ln_qt - ((k + 1) as f64).ln()).exp();
        if (k + 1) as f64 > qt {
            // Poisson tail beyond k is bounded by a geometric series of ratio r.
            let r = qt / (k + 2) as f64;
            if w_next / (1.0 - r) <= opts.tolerance {
                break;
            }
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &p) in v.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            next[i] += p * (1.0 - gen.exit[i] / q);
            for &(j, rate) in &gen.rows[i] {
                next[j as usize] += p * rate / q;
            }
        }
        std::mem::swap(&mut v, &mut next);
        log_w += ln_qt - ((k + 1) as f64).ln();
        k += 1;
    }
    // The weights drift in floating point over long series; normalizing by
    // their computed sum spreads the drift and the cut tail over all states.
    acc.iter_mut().for_each(|a| *a /= used);
    Ok(Distribution {
        sites: n,
        weights: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::State;
    use crate::lattice::{Boundary, Site};
    use nalgebra::DMatrix;

    /// Dense generator written straight from the rate table, independent of
    /// the sparse path.
    fn dense_generator(sites: usize, ring: bool, p: &Params) -> DMatrix<f64> {
        let size = 3usize.pow(sites as u32);
        let mut q = DMatrix::<f64>::zeros(size, size);
        for code in 0..size {
            let s: Vec<u8> = (0..sites).map(|i| ((code / 3usize.pow(i as u32)) % 3) as u8).collect();
            for x in 0..sites {
                let mut nbrs = Vec::new();
                if ring {
                    nbrs.push((x + sites - 1) % sites);
                    nbrs.push((x + 1) % sites);
                } else {
                    if x > 0 {
                        nbrs.push(x - 1);
                    }
                    if x + 1 < sites {
                        nbrs.push(x + 1);
                    }
                }
                let n1 = nbrs.iter().filter(|&&y| s[y] == 1).count() as f64;
                let n2 = nbrs.iter().filter(|&&y| s[y] == 2).count() as f64;
                let pw = 3usize.pow(x as u32);
                let mut add = |target: u8, rate: f64| {
                    let to = code - s[x] as usize * pw + target as usize * pw;
                    q[(code, to)] += rate;
                    q[(code, code)] -= rate;
                };
                match s[x] {
                    0 => {
                        add(1, p.lambda * (n1 + n2));
                        add(2, p.gamma);
                    }
                    1 => {
                        add(2, p.alpha * n2);
                        add(0, p.forget);
                    }
                    _ => add(0, p.forget),
                }
            }
        }
        q
    }

    fn dense_transient(sites: usize, ring: bool, p: &Params, init: &Configuration, t: f64) -> Vec<f64> {
        let q = dense_generator(sites, ring, p);
        let m = (q * t).exp();
        let row = init.code() as usize;
        (0..m.ncols()).map(|j| m[(row, j)]).collect()
    }

    #[test]
    fn zero_time_is_the_identity() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(1.0, 2.0).unwrap();
        let init = Configuration::from_digits(&[2, 0, 1]).unwrap();
        let d = exact_transient(&l, &p, &init, 0.0).unwrap();
        assert_eq!(d.prob(&init), 1.0);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn single_site_pure_death() {
        let l = Lattice::line(1, Boundary::Free).unwrap();
        let p = Params::new(1.0, 2.0).unwrap();
        let init = Configuration::from_digits(&[2]).unwrap();
        let d = exact_transient(&l, &p, &init, 1.0).unwrap();
        let dead = Configuration::zeros(1);
        assert!((d.prob(&dead) - (1.0 - (-1.0f64).exp())).abs() < 1e-10);
        assert!((d.prob(&init) - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn agrees_with_dense_matrix_exponential() {
        let p = Params::new(1.0, 2.0).unwrap();
        for (sites, t) in [(3usize, 0.5), (3, 1.0), (4, 0.5), (4, 1.0)] {
            let l = Lattice::line(sites, Boundary::Torus).unwrap();
            let init = Configuration::single(sites, Site(0), State::Adopter).unwrap();
            let d = exact_transient(&l, &p, &init, t).unwrap();
            let dense = dense_transient(sites, true, &p, &init, t);
            let oracle = Distribution::from_weights(sites, dense).unwrap();
            let tv = d.tv_distance(&oracle);
            assert!(tv < 1e-8, "sites {sites} t {t}: tv {tv}");
            assert!((d.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn agrees_with_dense_oracle_with_gamma_and_free_boundary() {
        let p = Params::new(0.8, 1.5)
            .unwrap()
            .with_gamma(0.3)
            .unwrap()
            .with_forget(1.2)
            .unwrap();
        let l = Lattice::line(4, Boundary::Free).unwrap();
        let init = Configuration::from_digits(&[1, 2, 0, 0]).unwrap();
        let d = exact_transient(&l, &p, &init, 2.0).unwrap();
        let oracle = Distribution::from_weights(4, dense_transient(4, false, &p, &init, 2.0)).unwrap();
        assert!(d.tv_distance(&oracle) < 1e-8);
    }

    #[test]
    fn long_horizons_stay_normalized() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(3.0, 5.0).unwrap();
        let init = Configuration::uniform(3, State::Adopter);
        for t in [0.1, 5.0, 40.0, 400.0] {
            let d = exact_transient(&l, &p, &init, t).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-10, "t {t}: {}", d.total());
            assert!(d.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn all_ignorant_is_absorbing_without_gamma() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(2.0, 2.0).unwrap();
        let zero = Configuration::zeros(3);
        for t in [0.3, 3.0] {
            let d = exact_transient(&l, &p, &zero, t).unwrap();
            assert_eq!(d.prob(&zero), 1.0);
        }
    }

    #[test]
    fn derivative_at_zero_matches_generator() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(1.0, 2.0).unwrap().with_gamma(0.1).unwrap();
        let init = Configuration::from_digits(&[2, 1, 0]).unwrap();
        let h = 1e-6;
        let d = exact_transient(&l, &p, &init, h).unwrap();
        let exit = crate::dynamics::total_rate(&l, &init, &p).unwrap();
        // d/dt p_init = -exit rate
        assert!(((d.prob(&init) - 1.0) / h + exit).abs() < 1e-4);
        for x in l.sites() {
            for (to, rate) in crate::dynamics::local_rates(&l, &init, x, &p).unwrap() {
                let mut target = init.clone();
                target.set(x, to);
                assert!((d.prob(&target) / h - rate).abs() < 1e-4, "site {} -> {:?}", x.0, to);
            }
        }
    }

    #[test]
    fn errors() {
        let l = Lattice::line(3, Boundary::Torus).unwrap();
        let p = Params::new(1.0, 1.0).unwrap();
        let init = Configuration::zeros(3);
        assert!(matches!(
            exact_transient(&l, &p, &init, -1.0),
            Err(Error::InvalidTime(_))
        ));
        let big = Lattice::line(13, Boundary::Torus).unwrap();
        assert!(matches!(
            exact_transient(&big, &p, &Configuration::zeros(13), 1.0),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        let tight = TransientOptions { max_states: 26, ..Default::default() };
        assert!(exact_transient_with(&l, &p, &init, 1.0, tight).is_err());
    }
}
