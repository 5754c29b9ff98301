//! Seeded random generators.

pub mod core;
pub mod surface;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator stream for one case seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-case seeds derived from a batch seed, so cases are independent of
/// how the batch is split across workers.
pub fn case_seed(batch: u64, index: u64) -> u64 {
    batch.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index).rotate_left(17) ^ index
}
