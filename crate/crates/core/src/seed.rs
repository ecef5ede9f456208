//! Deterministic seed derivation.
//!
//! Every random stream in the toolkit is a ChaCha8 generator whose seed is a
//! SHA-256 digest of a master seed and a list of labels, so results do not
//! depend on the order in which cells or sites are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives a 64-bit seed from a master seed and labelled components.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, parts: &[&str]) -> Rng {
    rng_from_seed(derive_seed(master, parts))
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
