//! Named, seeded random streams.
//!
//! Every stochastic feature (initialization, each dropout site, shuffling)
//! draws from its own stream. A stream key is `(master_seed, label, counter)`;
//! the generator is ChaCha8 seeded with `SHA-256(master_seed_le || label)`
//! and positioned on ChaCha stream number `counter`. The mapping is
//! platform-independent, so identical keys replay identical sequences.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const STREAM_INIT: &str = "init";
pub const STREAM_DROPOUT_IN: &str = "dropout.in";
pub const STREAM_DROPOUT_FEAT: &str = "dropout.feat";
pub const STREAM_DROPOUT_OUT: &str = "dropout.out";
pub const STREAM_SHUFFLE: &str = "shuffle";

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    label: String,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        Self::with_counter(master_seed, label, 0)
    }

    pub fn with_counter(master_seed: u64, label: &str, counter: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(counter);
        Self {
            master_seed,
            label: label.to_owned(),
            counter,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// The per-feature streams consumed during training.
#[derive(Debug, Clone)]
pub struct TrainStreams {
    pub dropout_in: RngStream,
    pub dropout_feat: RngStream,
    pub dropout_out: RngStream,
}

impl TrainStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            dropout_in: RngStream::new(seed, STREAM_DROPOUT_IN),
            dropout_feat: RngStream::new(seed, STREAM_DROPOUT_FEAT),
            dropout_out: RngStream::new(seed, STREAM_DROPOUT_OUT),
        }
    }
}
