//! Deterministic per-item random streams.
//!
//! Every stochastic decision about one image draws from a ChaCha stream
//! seeded by SHA-256 of `(global seed, stage, image_id)`, so results do not
//! depend on worker scheduling or on which other images are in the batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream_seed(global_seed: u64, stage: &str, item: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update((stage.len() as u64).to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update(item.as_bytes());
    hasher.finalize().into()
}

pub fn item_rng(global_seed: u64, stage: &str, item: &str) -> StreamRng {
    StreamRng::from_seed(stream_seed(global_seed, stage, item))
}

/// Stream for whole-batch decisions (e.g. random baseline sampling).
pub fn global_rng(global_seed: u64, stage: &str) -> StreamRng {
    item_rng(global_seed, stage, "")
}
