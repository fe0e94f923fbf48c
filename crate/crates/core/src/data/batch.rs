use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffled mini-batches of item indices for one epoch. The shuffle depends
/// only on `(seed, epoch)`; the last batch may be short.
pub fn make_batches(n_items: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Endless per-epoch batch plans.
pub struct EpochBatches {
    n_items: usize,
    batch_size: usize,
    seed: u64,
    epoch: usize,
}

impl EpochBatches {
    pub fn new(n_items: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            n_items,
            batch_size,
            seed,
            epoch: 0,
        }
    }
}

impl Iterator for EpochBatches {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = make_batches(self.n_items, self.batch_size, self.seed, self.epoch);
        self.epoch += 1;
        Some(out)
    }
}
