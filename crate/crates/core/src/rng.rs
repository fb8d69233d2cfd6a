//! Deterministic random streams.
//!
//! Every random draw in the crate goes through a [`ChaCha8Rng`] derived from a
//! master seed and a list of stream keys (node id, record index, round, ...).
//! Derivation is order-sensitive and independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with stream keys into a new 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for the sub-stream identified by `keys` under `seed`.
pub fn stream(seed: u64, keys: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}
