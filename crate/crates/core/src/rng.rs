//! Named random sub-streams.
//!
//! Every source of randomness in a run is derived from one root seed and a
//! stream name, so perturbing one stream (say, augmentation) never shifts
//! another (say, initialization).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream names used across the crate.
pub mod stream {
    pub const DATA: &str = "data";
    pub const INIT: &str = "init";
    pub const BATCH: &str = "batch";
    pub const AUGMENT: &str = "augment";
    pub const SPLIT: &str = "split";
    pub const OOD: &str = "ood";
    pub const TEST: &str = "test";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit seed for `(root, name, index)`.
pub fn derive_seed(root: u64, name: &str, index: u64) -> u64 {
    // FNV-1a over the name
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(root ^ h).wrapping_add(splitmix64(index)))
}

/// A ChaCha generator for the named sub-stream.
pub fn stream_rng(root: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, name, index))
}
