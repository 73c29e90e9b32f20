//! Named, reproducible random streams derived from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Stream for a named purpose (`"dataset"`, `"init"`, `"shuffle"`, `"attack"`, ...).
pub fn substream(seed: u64, name: &str) -> StreamRng {
    indexed_substream(seed, name, 0)
}

/// Stream for item `index` of a named purpose, independent of every other index.
pub fn indexed_substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, "init").random();
        let b: u64 = substream(7, "init").random();
        let c: u64 = substream(7, "shuffle").random();
        let d: u64 = indexed_substream(7, "init", 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
