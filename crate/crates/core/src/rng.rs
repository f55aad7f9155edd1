//! Labeled random streams derived from a run's master seed.
//!
//! Each stream seed is the first eight bytes of SHA-256 over the label and
//! the master seed, so introducing a new label never shifts existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stream_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(master.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_stable_and_distinct() {
        assert_eq!(stream_seed(7, "los"), stream_seed(7, "los"));
        assert_ne!(stream_seed(7, "los"), stream_seed(7, "placement"));
        assert_ne!(stream_seed(7, "los"), stream_seed(8, "los"));
        let a: f64 = stream(1, "x").gen();
        let b: f64 = stream(1, "x").gen();
        assert_eq!(a, b);
    }
}
