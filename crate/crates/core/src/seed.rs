//! Seed derivation. Every random stream is a pure function of the base seed
//! and a few integers naming its role, so results do not depend on worker
//! count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used when deriving sub-seeds.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const WALK: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const GRAPH: u64 = 6;
    pub const TEXT: u64 = 7;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed`.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64, parts: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(seed, parts))
}
