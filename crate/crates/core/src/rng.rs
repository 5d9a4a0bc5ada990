//! Counter-based random numbers.
//!
//! The generator is SplitMix64 used in random-access form: draw `i` of the
//! substream with key `k` is `mix64(k + (i + 1) * GOLDEN_GAMMA)`. Substream
//! keys are obtained by folding tags into the run seed with [`derive()`], so every
//! Poisson clock, replicate and thinning decision has its own reproducible
//! stream independent of iteration order or thread count.
//!
//! Uniforms use the top 53 bits of a draw. Exponentials are `-ln(u) / rate`
//! with `u` in the open unit interval.

/// Weyl increment of SplitMix64 (the odd integer closest to 2^64 / phi).
pub const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream tags. These values are part of the reproducibility contract.
pub mod tag {
    pub const LAMBDA: u64 = 1;
    pub const ALPHA: u64 = 2;
    pub const DEATH: u64 = 3;
    pub const GAMMA: u64 = 4;
    pub const THINNING: u64 = 5;
    pub const GILLESPIE: u64 = 6;
    pub const REPLICATE: u64 = 7;
    pub const BLOCK: u64 = 8;
    pub const INITIAL: u64 = 9;
    pub const GRID: u64 = 10;
}

/// SplitMix64 finalizer (Stafford variant 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child key from a parent key and a tag. Injective in `tag` for a
/// fixed parent.
#[inline]
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix64(mix64(parent).wrapping_add(tag.wrapping_mul(GOLDEN_GAMMA)))
}

/// Folds a path of tags into `seed`.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |key, &t| derive(key, t))
}

/// Maps 64 random bits to a uniform in the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    // 52 bits keep `k + 0.5` exact, so the result never rounds up to 1
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Maps 64 random bits to a uniform in [0, 1).
#[inline]
pub fn unit_closed_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A positioned substream: `key` selects the stream, `counter` the next draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn from_path(seed: u64, path: &[u64]) -> Self {
        Self::new(derive_path(seed, path))
    }

    /// Value of draw `index` without advancing.
    #[inline]
    pub fn at(&self, index: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        unit_open(self.next_u64())
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_closed_open(self.next_u64())
    }

    /// Exponential variate with the given positive rate.
    #[inline]
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -self.next_open01().ln() / rate
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift, rejection-free bias < 2^-40 for n < 2^24).
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
