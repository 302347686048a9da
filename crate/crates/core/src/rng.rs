//! Deterministic seeded randomness.
//!
//! All randomness in the crate flows through [`Rng`], a thin wrapper around
//! ChaCha8 (`rand_chacha`, 8-round ChaCha keyed by the 64-bit seed). The
//! algorithm and its constants are fixed, so a given seed produces the same
//! draw sequence on every platform and every run. Independent sub-streams for
//! parallel jobs come from ChaCha's native stream parameter rather than from
//! ad-hoc seed arithmetic.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use alloc::vec::Vec;

use crate::fmath;

/// Seeded generator; single-owner, not shareable across threads.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Fresh generator with the same seed on an independent stream.
    ///
    /// Streams never overlap, so `(seed, stream)` identifies a reproducible
    /// draw sequence for one job in a batch.
    pub fn substream(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Rng {
            inner,
            seed: self.seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw from `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw via Box-Muller on two uniform draws.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        // 1 - u in (0, 1] keeps the log argument positive.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        fmath::sqrt(-2.0 * fmath::ln(u1)) * fmath::cos(2.0 * core::f64::consts::PI * u2)
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        // Fisher-Yates, back to front.
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    #[cfg(test)]
    pub(crate) fn raw_u64(&mut self) -> u64 {
        use rand::RngCore;
        self.inner.next_u64()
    }
}
