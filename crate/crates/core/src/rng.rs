//! Counter-based random streams.
//!
//! Every random draw is addressed by `(seed, domain, index)`, so results do not
//! depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key.
pub mod domain {
    pub const LLR_P: u64 = 0x11;
    pub const LLR_Q: u64 = 0x12;
    pub const BATCH: u64 = 0x21;
    pub const NOISE: u64 = 0x22;
    pub const CHALLENGE: u64 = 0x31;
    pub const COIN: u64 = 0x32;
    pub const TRIAL: u64 = 0x33;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// Independent stream for sample `index` within `domain`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, domain));
    rng.set_stream(index);
    rng
}
