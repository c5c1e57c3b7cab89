//! Reproducible random streams.
//!
//! ChaCha12 is a counter-mode generator, so `(seed, stream)` pairs give
//! independent substreams whose output does not depend on how work is split
//! across threads. Gaussians come from the inverse CDF rather than a
//! rejection sampler, keeping every draw bit-identical across platforms.

use crate::math::norm_inv_cdf;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A deterministic substream of a seeded generator.
pub struct Stream {
    inner: ChaCha12Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Stream { inner }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via the inverse CDF.
    pub fn next_gaussian(&mut self) -> f64 {
        norm_inv_cdf(self.next_uniform())
    }
}
