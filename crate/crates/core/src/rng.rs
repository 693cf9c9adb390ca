//! Seeded random streams.
//!
//! All randomness comes from xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`). Independent streams are derived from a parent seed and a
//! stream tag so that results do not depend on call ordering across streams.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Prng = Xoshiro256PlusPlus;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(mix64(parent) ^ tag.rotate_left(17))
}

pub fn stream(parent: u64, tag: u64) -> Prng {
    Prng::seed_from_u64(derive_seed(parent, tag))
}

pub fn seeded(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}
