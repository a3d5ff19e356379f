//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream derived from
//! a master seed, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_TARGETS: u64 = 0;
pub const STREAM_POLICY: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_INIT: u64 = 3;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-item seed for item `index` of a batch run under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
