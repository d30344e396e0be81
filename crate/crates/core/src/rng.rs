//! Seeded random streams. Every stochastic component draws from a
//! `ChaCha8Rng` derived from a `(seed, stream)` pair so independent
//! consumers never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids reserved for the generators in this crate.
pub mod stream {
    pub const TRAIN_DATASET: u64 = 0;
    pub const TEST_TOPOLOGIES: u64 = 1;
    pub const SHADOWING: u64 = 2;
    pub const ENV: u64 = 3;
    pub const LEARNER: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const BOUNDS: u64 = 6;
    pub const ABLATION: u64 = 7;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
