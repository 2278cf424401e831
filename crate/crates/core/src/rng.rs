//! Deterministic random streams.
//!
//! Every stream is a ChaCha12 generator keyed by the SHA-256 digest of the
//! master seed and a list of integer labels (dataset index, unit index, and
//! so on). Streams depend only on their labels, never on scheduling, so
//! results are identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

const DOMAIN: &[u8] = b"seqscm/stream/v1";

pub fn stream_key(master_seed: u64, labels: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master_seed.to_le_bytes());
    hasher.update((labels.len() as u64).to_le_bytes());
    for label in labels {
        hasher.update(label.to_le_bytes());
    }
    hasher.finalize().into()
}

pub fn seeded_rng(master_seed: u64, labels: &[u64]) -> StreamRng {
    ChaCha12Rng::from_seed(stream_key(master_seed, labels))
}
