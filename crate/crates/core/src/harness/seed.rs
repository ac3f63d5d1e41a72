//! Counter-based seed derivation.
//!
//! Every trial gets its own ChaCha8 stream whose seed is a pure function of
//! `(master_seed, axis index, coding, trial index)`, so results do not depend
//! on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` along `path`.
pub fn split_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(parent), |acc, &x| mix(acc ^ mix(x)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
