//! Seeded random substreams.
//!
//! Each stream is a xoshiro256++ generator. Its state is expanded with
//! SplitMix64 from `seed` mixed with a fixed per-purpose constant, so the
//! mobility, traffic and jitter sequences are independent of each other and of
//! the order in which they are consumed.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    Mobility,
    Traffic,
    Jitter,
}

impl StreamLabel {
    fn salt(self) -> u64 {
        match self {
            StreamLabel::Mobility => 0x6d6f_6269_6c69_7479,
            StreamLabel::Traffic => 0x7472_6166_6669_6300,
            StreamLabel::Jitter => 0x6a69_7474_6572_0000,
        }
    }
}

pub struct RandomStream {
    seed: u64,
    label: StreamLabel,
    inner: Xoshiro256PlusPlus,
}

impl RandomStream {
    pub fn new(seed: u64, label: StreamLabel) -> Self {
        let mixed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ label.salt();
        RandomStream {
            seed,
            label,
            inner: Xoshiro256PlusPlus::seed_from_u64(mixed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            self.inner.gen_range(lo..hi)
        } else {
            lo
        }
    }

    /// Uniform in `(lo, hi]`.
    pub fn uniform_left_open(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            hi - self.inner.gen_range(0.0..(hi - lo))
        } else {
            hi
        }
    }

    /// Uniform integer in `[0, n]`.
    pub fn below_inclusive(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..=n)
    }

    /// Uniform index in `[0, n)`. Panics on `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}
