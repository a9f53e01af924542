//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random quantity in a sweep is drawn from its own ChaCha stream whose
//! seed is a hash of a key tuple such as `(seed, p, instance)`. Results are
//! therefore independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a key tuple into a single 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6C61_7064_6966_6621, |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    rng_from_seed(derive_seed(parts))
}
