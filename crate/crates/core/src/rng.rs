//! Deterministic random-stream hierarchy.
//!
//! Every stochastic task derives its own ChaCha stream from the master seed
//! and a path of task tags, so results do not depend on scheduling order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod tag {
    pub const CALIBRATION: u64 = 1;
    pub const COMPLEXITY: u64 = 2;
    pub const CHAIN: u64 = 3;
    pub const REPLICATE: u64 = 4;
    pub const TRUTH_GRAPH: u64 = 5;
    pub const TRUTH_RESPONSE: u64 = 6;
    pub const DESIGN: u64 = 7;
    pub const BOOTSTRAP: u64 = 8;
    pub const PSI_CALIBRATION: u64 = 9;
    pub const FIT: u64 = 10;
    pub const PPC: u64 = 11;
    pub const GRID: u64 = 12;
    pub const INIT: u64 = 13;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of tags.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
