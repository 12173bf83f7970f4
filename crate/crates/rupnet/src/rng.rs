//! Seeded random number generation.
//!
//! Backed by ChaCha8, a fixed, portable 64-bit-seedable generator. Each
//! purpose (weight init, augmentation, synthetic data, shuffling, benchmark
//! inputs) draws from its own stream so adding draws to one purpose never
//! perturbs another.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// Stream ids, one per purpose.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const AUGMENT: u64 = 1;
    pub const SYNTH: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const BENCH: u64 = 5;
    /// Per-epoch shuffle streams start here: `SHUFFLE_EPOCH_BASE + epoch`.
    pub const SHUFFLE_EPOCH_BASE: u64 = 1 << 16;
    /// Per-sample synthetic-data streams start here: `SYNTH_SAMPLE_BASE + index`.
    pub const SYNTH_SAMPLE_BASE: u64 = 1 << 32;
}

/// Deterministic seeded generator. Exclusive-access: one owner at a time.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    /// Generator for `seed` on the default (init) stream.
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, stream::INIT)
    }

    /// Generator for `seed` on an independent stream.
    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { inner }
    }

    /// Tensor of i.i.d. normal draws. `std` must be >= 0; draws are taken in
    /// f64 and narrowed, so the sequence is identical in f32 and f64 modes.
    pub fn normal_tensor<E: Scalar>(
        &mut self,
        shape: &[usize],
        mean: f64,
        std: f64,
    ) -> Result<TensorBase<E>> {
        if std < 0.0 || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "normal draw needs finite mean and std >= 0, got mean={mean} std={std}"
            )));
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut self.inner);
            data.push(E::from_f64(mean + std * z));
        }
        TensorBase::from_vec(shape, data)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            // random_range panics on an empty range; still consume one draw so
            // the stream position does not depend on the bounds.
            let _ = self.inner.random::<f64>();
            return lo;
        }
        self.inner.random_range(lo..hi)
    }

    /// Bernoulli draw with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.inner.random_bool(p.clamp(0.0, 1.0))
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle in place.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.inner);
    }
}
