//! Deterministic epoch ordering and per-sample augmentation seeds.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Visiting order of `n` samples in `epoch`; a permutation fixed by `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order
}

/// Augmentation seed of sample `index` in `epoch`.
pub fn augment_seed(seed: u64, epoch: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a06d_0000_0000);
    rng.set_stream(epoch);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}
