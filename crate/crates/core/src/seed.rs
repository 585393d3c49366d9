//! Reproducible per-replica random streams.
//!
//! A stream seed is `SHA-256("interlace/stream/v1" || master || replica || tag)`,
//! with integers little-endian and the tag length-prefixed. The seed keys a ChaCha8
//! generator, whose 64-bit block counter makes streams independent by construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator used for every stream.
pub type StreamRng = ChaCha8Rng;

/// Name recorded in run manifests.
pub const GENERATOR: &str = "ChaCha8 (rand_chacha 0.9), seeds SHA-256(interlace/stream/v1 | master | replica | tag)";

pub fn derive_seed(master: u64, replica: u64, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"interlace/stream/v1");
    h.update(master.to_le_bytes());
    h.update(replica.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.finalize().into()
}

pub fn stream(master: u64, replica: u64, tag: &str) -> StreamRng {
    StreamRng::from_seed(derive_seed(master, replica, tag))
}
