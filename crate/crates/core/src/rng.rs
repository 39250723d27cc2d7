//! Seeded random streams.
//!
//! Every trial owns one [`SimRng`]. Trial seeds are derived from the master
//! seed by [`trial_seed`], which is the documented splitting rule used by
//! the experiment runner.

use rand::SeedableRng;

pub type SimRng = rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes two 64-bit words into one. Not cryptographic.
pub fn hash64(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(32) ^ 0x6A09_E667_F3BC_C909)
}

/// `seed_trial = hash64(master_seed, trial_index)`
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    hash64(master_seed, trial)
}

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
