//! Seeded random streams.
//!
//! Every sampler takes a `rand::Rng`. The CLI and the examples derive their
//! generators here: run seed `s` and stream `c` map to
//! `ChaCha8Rng::seed_from_u64(s)` followed by `set_stream(c)`. Stream 0 is the
//! main run; multi-chain runs use streams `1..=chains` in chain order. ChaCha8
//! output is value-stable across `rand_chacha` releases, so the mapping from
//! seed to samples only changes when the sampling code itself changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Smallest value produced by [`open_unit`].
pub const MIN_UNIFORM: f64 = 1.0 / (1u64 << 53) as f64;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
