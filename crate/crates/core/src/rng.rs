//! Named random streams derived from one top-level seed.
//!
//! Each module asks for its own stream by name so that adding draws in one
//! place never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Deterministic stream for `(seed, name)`.
pub fn stream(seed: u64, name: &str) -> Rng {
    substream(seed, name, 0)
}

/// Deterministic stream for `(seed, name, index)`, used for per-trial streams.
pub fn substream(seed: u64, name: &str, index: u64) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
