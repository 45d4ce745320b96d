//! Splittable seed derivation.
//!
//! Every random stream in the crate is keyed by `(master, stream, index)` and
//! mixed through SplitMix64, so samples can be generated in any order (or in
//! parallel) and still reproduce exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 finalisation round.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for `index` within `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(master) ^ stream.wrapping_mul(GOLDEN)) ^ index)
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Stream identifiers. Distinct constants keep unrelated streams disjoint.
pub mod stream {
    pub const TAP: u64 = 0x7A9;
    pub const PILOT: u64 = 0x9170;
    pub const NOISE: u64 = 0x4015E;
    pub const FADING: u64 = 0xFAD;
    pub const SCENARIO: u64 = 0x5CE;
    pub const INIT: u64 = 0x1417;
    pub const SHUFFLE: u64 = 0x5F1E;
}
