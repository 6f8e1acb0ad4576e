//! Deterministic derivation of independent sub-seeds.

use sha2::{Digest, Sha256};

/// Hashes `(seed, tag, index)` into a fresh 64-bit seed.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}
