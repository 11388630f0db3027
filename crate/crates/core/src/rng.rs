//! Deterministic seed derivation: every random stage draws from a ChaCha
//! stream whose seed is a SHA-256 digest of the master seed, a stage name,
//! and an optional index. Parallel stages therefore never share state, and
//! scheduling order cannot change any output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG for a named pipeline stage.
pub fn stage_rng(master_seed: u64, stage: &str) -> ChaCha8Rng {
    sub_rng(master_seed, stage, 0)
}

/// RNG for the `index`-th independent unit of a named stage (a tree, a fold,
/// a class, a permutation repeat).
pub fn sub_rng(master_seed: u64, stage: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(stage.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
