//! Deterministic random sampling with independent substreams.
//!
//! Every stochastic component of the crate draws from a [`SeededRng`].
//! Substreams are derived from `(seed, path)` so that a simulation can hand
//! disjoint, reproducible streams to channel generation, message
//! generation, noise and each decoder without any coordination.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic generator: the same seed always yields the same stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent substream keyed by `path`. The derivation
    /// depends only on the original seed and the path words, never on how
    /// much of this stream has been consumed.
    pub fn substream(&self, path: &[u64]) -> SeededRng {
        let mut s = self.seed;
        for &w in path {
            s = splitmix64(s ^ w.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        SeededRng::new(splitmix64(s))
    }

    /// One draw of `Z = X + iY` with `X, Y` independent `N(0,1)`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im)
    }

    pub fn complex_normal_vector(&mut self, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| self.complex_normal()).collect()
    }

    /// Uniform index in `[0, m)`.
    pub fn uniform_index(&mut self, m: usize) -> usize {
        assert!(m > 0, "uniform_index over an empty range");
        self.rng.random_range(0..m)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
