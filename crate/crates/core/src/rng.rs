//! Deterministic seeding.
//!
//! Everything random in the crate is derived from a 64-bit master seed by
//! hashing `(seed, stream, index...)`. Environment fields use the hash
//! directly as a counter-based generator keyed on lattice coordinates;
//! simulations use a ChaCha stream seeded from the hash.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per consumer, so no two modules ever share a seed.
pub mod stream {
    pub const ENVIRONMENT: u64 = 0x656e_7669;
    pub const BERNOULLI: u64 = 0x6265_726e;
    pub const DYNAMICS: u64 = 0x6479_6e61;
    pub const WALK: u64 = 0x7761_6c6b;
    pub const OU: u64 = 0x6f75_6c69;
    pub const EIGEN: u64 = 0x6569_676e;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &w| mix64(acc ^ mix64(w)))
}

/// Maps a 64-bit word to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed for replica `index` of the stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    hash_words(&[master, stream, index])
}

pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
