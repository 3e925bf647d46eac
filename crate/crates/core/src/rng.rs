//! Seed handling.
//!
//! Every random draw in the crate comes from a [`Stream`] derived from a
//! root seed and a label. Streams for different labels are independent, so
//! adding a new consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Derives the stream for `label` under the root `seed`.
pub fn stream(seed: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Stream for the `index`-th member of a family (workers, path batches, repeats).
pub fn substream(seed: u64, label: &str, index: u64) -> Stream {
    stream(seed, &format!("{label}/{index}"))
}
