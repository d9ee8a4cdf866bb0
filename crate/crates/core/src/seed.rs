//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! seeded from one root seed plus a stream tag, so no component touches
//! ambient entropy and streams stay independent of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Adding a tag never perturbs existing streams.
pub mod stream {
    pub const FLIPS: u64 = 0x01;
    pub const SPLIT: u64 = 0x02;
    pub const SIGMA: u64 = 0x03;
    pub const KMEANS: u64 = 0x04;
    pub const BALANCE: u64 = 0x05;
    pub const SCENARIO: u64 = 0x06;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}
