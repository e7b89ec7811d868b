//! Seed derivation for parallel, schedule-independent randomness.
//!
//! Every worker that needs randomness gets its own generator seeded by
//! [`derive_seed`]`(master, stream, index)`. The function is SplitMix64
//! applied to a mix of the three inputs, so the seed of tree 17 in
//! iteration 3 never depends on how many threads ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers keep unrelated consumers of the same master seed apart.
pub mod stream {
    pub const FOREST_TREE: u64 = 1;
    pub const SHADOW_PERMUTATION: u64 = 2;
    pub const SHADOW_FOREST: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const SYNTH_USER: u64 = 5;
    pub const SYNTH_GRAPH: u64 = 6;
    pub const GBT: u64 = 7;
    pub const RESAMPLE: u64 = 8;
    pub const SYNTH_DRAW: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
