//! Named random substreams.
//!
//! Every piece of randomness in the crate flows from one root seed through
//! a labelled substream, so stages can be re-run (or resumed) in isolation
//! without disturbing each other's streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derive a 32-byte seed for the substream `label` of `root`.
pub fn substream_seed(root: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}

/// A deterministic RNG for the substream `label` of `root`.
pub fn substream_rng(root: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(substream_seed(root, label))
}
