//! Seeded random number generation.
//!
//! Every stochastic operation in the workspace (weight init, dropout masks,
//! shuffling, synthetic data) draws from a [`Prng`] that is threaded through
//! explicitly, so identical seeds give bit-identical runs.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic pseudo-random generator (ChaCha8 behind a small facade).
#[derive(Debug, Clone)]
pub struct Prng {
    inner: ChaCha8Rng,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent child generator. Consumes one draw from `self`,
    /// so successive forks yield distinct streams.
    pub fn fork(&mut self) -> Prng {
        Prng::new(self.inner.gen::<u64>())
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let z: f64 = self.inner.sample(StandardNormal);
        mean + std * z
    }

    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn usize_below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// Fill a vector with uniform draws in `[-bound, bound)`.
    pub fn uniform_vec(&mut self, n: usize, bound: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(-bound, bound)).collect()
    }
}
