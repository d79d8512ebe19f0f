//! Labeled random streams derived from a single master seed.
//!
//! Every consumer of randomness asks for a stream by `(label, index)`. The
//! derived seed depends only on the master seed, the label and the index, so
//! adding a new consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive a child seed for `(label, index)` under `master`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let a = splitmix64(master ^ fnv1a(label));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Deterministic generator for an explicit seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for a labeled child stream of `master`.
pub fn stream(master: u64, label: &str, index: u64) -> SimRng {
    seeded_rng(derive_seed(master, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = stream(7, "wind", 3).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, "wind", 3).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_and_indices_separate_streams() {
        let base = derive_seed(7, "wind", 3);
        assert_ne!(base, derive_seed(7, "wind", 4));
        assert_ne!(base, derive_seed(7, "start", 3));
        assert_ne!(base, derive_seed(8, "wind", 3));
    }
}
