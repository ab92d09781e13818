//! Seeded random streams. Every random draw in the toolkit goes through a
//! `ChaCha8Rng` seeded from a `u64`, so identical seeds reproduce
//! identical streams on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a sub-stream (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn uniform_vec<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// `count` input valuations with components uniform in `[-1, 1]`.
pub fn uniform_inputs(seed: u64, count: usize, width: usize) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    (0..count).map(|_| uniform_vec(&mut rng, width, -1.0, 1.0)).collect()
}
