//! Seeded sampling for phantom generation.
//!
//! The generator is PCG64 (128-bit LCG, XSL-RR output) as implemented by
//! `rand_pcg::Lcg128Xsl64::new(state, stream)`:
//!
//! - state  = `(seed << 64) | 0x853c49e6748fea9b`
//! - stream = `(kind << 120) | (patient << 64) | (study << 32) | series`,
//!   with kind 1 for per-patient draws, 2 for per-series draws and 0 for
//!   standalone generators from [`PhantomRng::seeded`].
//!
//! A uniform real is `(next_u64 >> 11) · 2⁻⁵³` and an integer below `n` is
//! `(next_u64 · n) >> 64` computed in 128 bits.

use rand_core::Rng;
use rand_pcg::Pcg64;

const STATE_LOW: u128 = 0x853c_49e6_748f_ea9b;

#[derive(Debug, Clone, Copy)]
pub(crate) enum StreamKind {
    Standalone = 0,
    Patient = 1,
    Series = 2,
}

#[derive(Debug, Clone)]
pub struct PhantomRng(Pcg64);

impl PhantomRng {
    pub(crate) fn stream(seed: u64, kind: StreamKind, patient: u32, study: u32, series: u32) -> Self {
        let state = ((seed as u128) << 64) | STATE_LOW;
        let stream = ((kind as u128) << 120)
            | ((patient as u128) << 64)
            | ((study as u128) << 32)
            | series as u128;
        PhantomRng(Pcg64::new(state, stream))
    }

    pub fn seeded(seed: u64) -> Self {
        Self::stream(seed, StreamKind::Standalone, 0, 0, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
