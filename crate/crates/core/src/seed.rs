//! Seed derivation.
//!
//! Every stochastic component owns a `ChaCha8Rng` whose seed is derived from
//! the run seed and a path of integer tags, so results never depend on the
//! order in which sibling components draw numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a sequence of tags.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tags))
}

/// Stable tags for the independent random streams of a run.
pub mod stream {
    pub const LAYOUT: u64 = 1;
    pub const GOALS: u64 = 2;
    pub const DEMOS: u64 = 3;
    pub const INIT_LOW: u64 = 4;
    pub const INIT_HIGH: u64 = 5;
    pub const SHUFFLE_LOW: u64 = 6;
    pub const SHUFFLE_HIGH: u64 = 7;
    pub const EVAL: u64 = 8;
    pub const ROLLOUT: u64 = 9;
    pub const DEMO_BATCH: u64 = 10;
    pub const START: u64 = 11;
    pub const DISTILL: u64 = 12;
    pub const FINETUNE: u64 = 13;
}
