//! Seed derivation. A run is driven by one master seed; every independent
//! randomness consumer (dataset generator, receiver, sender, trial k, ...)
//! gets its own ChaCha stream keyed by a label, so the parties' randomness is
//! independent but the whole run replays bit-exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_be_bytes());
    h.update([0x1f]);
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn derive_rng(master: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(master, label))
}

/// ChaCha stream keyed by raw seed material plus a label.
pub fn rng_from_bytes(seed: &[u8], label: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(seed);
    h.update([0x2e]);
    h.update(label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}
