//! Counter-addressed Gaussian noise.
//!
//! Every draw is a pure function of `(seed, path, step, channel)`: the seed
//! keys a ChaCha8 generator, the path selects its stream, and the pair
//! `(step, channel)` selects a 64-byte block inside that stream. Paths can
//! therefore be generated in any order, on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// 32-bit words per counter slot (one ChaCha block).
const WORDS_PER_SLOT: u128 = 16;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    base: ChaCha8Rng,
    n_channels: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, path: u64, n_channels: usize) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(path);
        Self { base, n_channels }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// A standard normal variate for `(step, channel)`.
    pub fn normal(&self, step: u64, channel: usize) -> f64 {
        debug_assert!(channel < self.n_channels);
        let counter = step as u128 * self.n_channels as u128 + channel as u128;
        let mut rng = self.base.clone();
        rng.set_word_pos(counter * WORDS_PER_SLOT);
        StandardNormal.sample(&mut rng)
    }

    /// Brownian increments with variance `dt` for every channel of `step`.
    pub fn increments(&self, step: u64, dt: f64, out: &mut [f64]) {
        let s = dt.sqrt();
        for (c, o) in out.iter_mut().enumerate() {
            *o = s * self.normal(step, c);
        }
    }
}

/// Sums consecutive blocks of `factor` fine increments (row-major,
/// `n_channels` per step) into coarse increments of the same path.
pub fn coarsen_increments(fine: &[Vec<f64>], factor: usize) -> Vec<Vec<f64>> {
    assert!(factor > 0 && fine.len().is_multiple_of(factor), "step count must divide evenly");
    fine.chunks(factor)
        .map(|block| {
            let mut acc = vec![0.0; block[0].len()];
            for row in block {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            acc
        })
        .collect()
}
