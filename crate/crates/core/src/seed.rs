//! Hierarchical seed derivation.
//!
//! Every random stream in a run is keyed by a path of labels below the
//! master seed, so results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Derives a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, path: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in path {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Canonical label for an augmentation fraction (basis points), used in seed paths.
pub fn fraction_label(fraction: f64) -> String {
    format!("{}bp", (fraction * 10_000.0).round() as i64)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_path_sensitive() {
        assert_eq!(derive_seed(7, &["a", "b"]), derive_seed(7, &["a", "b"]));
        assert_ne!(derive_seed(7, &["a", "b"]), derive_seed(7, &["ab"]));
        assert_ne!(derive_seed(7, &["a"]), derive_seed(8, &["a"]));
    }

    #[test]
    fn fraction_labels() {
        assert_eq!(fraction_label(0.0), "0bp");
        assert_eq!(fraction_label(0.05), "500bp");
        assert_eq!(fraction_label(10.0), "100000bp");
    }
}
