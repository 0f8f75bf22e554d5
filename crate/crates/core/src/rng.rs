//! Reproducible random streams.
//!
//! Every stochastic quantity is drawn from a ChaCha8 stream whose key is a
//! hash of the user seed and the coordinates of the draw (voxel index, split
//! index, threshold, ...). Results therefore do not depend on the order in
//! which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single 64-bit subseed.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = mix64(GOLDEN ^ words.len() as u64);
    for &w in words {
        h = mix64(h.wrapping_add(GOLDEN) ^ mix64(w));
    }
    h
}

/// Stream keyed by `seed` and positioned on sub-stream `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    rng.set_stream(stream);
    rng
}

/// Stream keyed by a hash of `words`.
pub fn keyed(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_words(words))
}
