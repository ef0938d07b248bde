//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream addressed by
//! `(seed, purpose, index)`, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream purposes. Distinct values keep the streams disjoint.
pub mod purpose {
    pub const MAIN: u64 = 1;
    pub const ESTIMATE: u64 = 2;
    pub const KERNEL: u64 = 3;
    pub const MPV: u64 = 4;
    pub const GLOBAL: u64 = 5;
    pub const PAIRS: u64 = 6;
    pub const PROBE: u64 = 7;
    pub const JITTER: u64 = 8;
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, purpose: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(purpose.wrapping_mul(0x1_0000_0001) ^ mix(index)));
    rng
}

/// Child seed for derived computations (e.g. one rollout inside an ensemble).
pub fn derive(seed: u64, purpose: u64, index: u64) -> u64 {
    mix(seed ^ mix(purpose) ^ mix(index.wrapping_add(0x51_7CC1_B727_220A)))
}
