//! Reproducible subsampling.
//!
//! Every random draw in training comes from a `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`. A sample of `fraction` of `n` items is taken as
//! follows: start from the sorted indices `0..n`, run Fisher-Yates from the
//! back (position `i` swaps with `next_u64() % (i + 1)`), keep the first
//! `max(1, floor(fraction * n))` entries and sort them again. A fraction of
//! 1 keeps everything and draws nothing from the generator.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrainRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TrainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).floor() as usize).clamp(1, n.max(1))
}

/// Sorted subset of `items` holding `sample_count(items.len(), fraction)`
/// elements.
pub fn sample_sorted<T: Copy + Ord>(items: &[T], fraction: f64, rng: &mut TrainRng) -> Vec<T> {
    let mut pool = items.to_vec();
    pool.sort_unstable();
    if fraction >= 1.0 || items.len() <= 1 {
        return pool;
    }
    fisher_yates(&mut pool, rng);
    pool.truncate(sample_count(items.len(), fraction));
    pool.sort_unstable();
    pool
}

pub fn fisher_yates<T>(items: &mut [T], rng: &mut TrainRng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}
