//! Reproducible random streams for the Monte Carlo transport.
//!
//! Built on ChaCha8, whose independent stream counter lets parallel workers
//! draw from provably disjoint sequences of one logical generator: worker `i`
//! owns `RandomStream::new(seed, i)`. Identical `(seed, stream_id)` pairs
//! always reproduce the identical draw sequence, independent of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded, stream-partitioned uniform random source.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw from `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw from `(0, 1]`, as required by the free-path sampler where
    /// `ln(q)` must stay finite.
    pub fn next_unit_open_low(&mut self) -> f64 {
        1.0 - self.next_unit()
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_unit() < p
    }
}
