//! Deterministic seeding helpers shared by every stochastic stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// 64-bit hash of `bytes` that is stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Seed for a named pipeline stage: `global ^ hash(tag)`.
pub fn stage_seed(global: u64, tag: &str) -> u64 {
    global ^ stable_hash(tag.as_bytes())
}

/// Generator keyed by `(seed, stream, index)`. Distinct keys give
/// independent streams, so callers can draw per item without depending on
/// iteration order or thread schedule.
pub fn keyed_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn stage_seeds_differ_by_tag() {
        assert_ne!(stage_seed(7, "split"), stage_seed(7, "smote"));
        assert_eq!(stage_seed(7, "split"), stage_seed(7, "split"));
    }

    #[test]
    fn keyed_streams_are_independent_of_draw_order() {
        let a: u64 = keyed_rng(1, 2, 3).gen();
        let _ = keyed_rng(1, 2, 4).gen::<u64>();
        let b: u64 = keyed_rng(1, 2, 3).gen();
        assert_eq!(a, b);
        assert_ne!(a, keyed_rng(1, 2, 4).gen::<u64>());
    }
}
