//! Deterministic RNG streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream whose seed
//! is the SHA-256 digest of the master seed and a label path such as
//! `[INNER, iteration, slot]`. Streams are therefore independent of the
//! order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// Stream domain labels.
pub mod label {
    pub const INIT: u64 = 1;
    pub const BATCH: u64 = 2;
    pub const INNER: u64 = 3;
    pub const TEST: u64 = 4;
    pub const ADAPT: u64 = 5;
    pub const ROLLOUT: u64 = 6;
    pub const INDIVIDUAL: u64 = 7;
    pub const EXPERIMENT: u64 = 8;
    pub const CHECK: u64 = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    master: u64,
}

impl RngStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, labels: &[u64]) -> StreamRng {
        StreamRng::from_seed(self.seed_bytes(labels))
    }

    /// A child family whose streams are disjoint from this family's.
    pub fn derive(&self, labels: &[u64]) -> RngStreams {
        let bytes = self.seed_bytes(labels);
        let mut head = [0u8; 8];
        head.copy_from_slice(&bytes[..8]);
        RngStreams::new(u64::from_le_bytes(head))
    }

    fn seed_bytes(&self, labels: &[u64]) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update((labels.len() as u64).to_le_bytes());
        for l in labels {
            hasher.update(l.to_le_bytes());
        }
        hasher.finalize().into()
    }
}
