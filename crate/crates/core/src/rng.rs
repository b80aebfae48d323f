//! Seeded random number generation.
//!
//! Every stochastic routine in the crate draws from [`Rng`], a ChaCha8 stream
//! cipher generator. ChaCha is counter based and fully specified, so a given
//! seed yields the same stream on every platform. Independent streams for
//! sub-tasks (one per pixel/centroid/iteration, one per training example, ...)
//! are obtained with [`derive_seed`], which folds a list of identifiers into
//! the base seed with the SplitMix64 finalizer.

use rand::SeedableRng;

/// The crate-wide generator.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Creates a generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of stream identifiers.
///
/// The result depends on the order of `parts`, so `(pixel, centroid)` and
/// `(centroid, pixel)` give different streams.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
