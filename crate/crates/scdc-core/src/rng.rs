//! Deterministic, splittable random streams.
//!
//! Every stochastic component (splitting, weight init, sampling, noise,
//! augmentation) draws from its own substream derived from
//! `(seed, purpose-tag, index...)`. Substream keys are hashed with SHA-256
//! into a ChaCha8 seed, so streams are stable across runs, platforms, and
//! process restarts, and adding draws to one consumer never shifts another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator handed to all randomized operations.
pub type Stream = ChaCha8Rng;

/// Root state from which all substreams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
}

/// Seed a named, splittable deterministic generator.
pub fn seed_rng(seed: u64) -> RngState {
    RngState { seed }
}

impl RngState {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive the substream identified by a purpose tag and one index.
    pub fn stream(&self, purpose: &str, index: u64) -> Stream {
        self.stream_n(purpose, &[index])
    }

    /// Derive a substream keyed by a purpose tag and several indices
    /// (e.g. `(epoch, step, slot)` for per-sample augmentation).
    pub fn stream_n(&self, purpose: &str, indices: &[u64]) -> Stream {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update([purpose.len() as u8]);
        hasher.update(purpose.as_bytes());
        for ix in indices {
            hasher.update(ix.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(key)
    }
}

/// Split a fresh child stream off an existing one.
///
/// Used where a consumer needs independent streams but no natural
/// `(purpose, index)` key exists, e.g. the weak/strong halves of one
/// augmentation pair.
pub fn split(rng: &mut Stream) -> Stream {
    use rand_chacha::rand_core::RngCore;
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    ChaCha8Rng::from_seed(key)
}
