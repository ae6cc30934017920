//! Deterministic derivation of independent random streams.
//!
//! Every randomized component of the library (weight init, shuffling, noise
//! draws, sweep points, evaluation repeats) owns a stream derived from the run
//! seed and a list of integer tags. Derivation is a fixed integer mix with no
//! platform dependence, so any parallel schedule that assigns the same tags
//! reproduces the same draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalization step.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a tag path.
///
/// Tag order matters: `derive_seed(s, &[1, 2]) != derive_seed(s, &[2, 1])`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = mix(base);
    for &t in tags {
        s = mix(s ^ mix(t));
    }
    s
}

/// A generator seeded from `base` and a tag path.
pub fn rng_from(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Stream tags, one per randomized subsystem.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const TRAIN_NOISE: u64 = 3;
    pub const EVAL_REPEAT: u64 = 4;
    pub const SWEEP_POINT: u64 = 5;
    pub const GRADCHECK: u64 = 6;
    pub const PDF_SAMPLE: u64 = 7;
}
