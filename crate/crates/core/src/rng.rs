//! Seed derivation. Every randomized routine takes a base seed and derives
//! an independent stream from it, so results are pure functions of
//! `(input, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, streams: &[u64]) -> u64 {
    streams.iter().fold(mix(base), |acc, &s| mix(acc ^ mix(s)))
}

pub fn rng_for(base: u64, streams: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, streams))
}
