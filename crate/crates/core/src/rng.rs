//! Seed derivation for independent, order-stable random substreams.
//!
//! Every parallel loop in the crate draws from a generator keyed by
//! `(root seed, tag, index)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags keep substreams of different purposes disjoint.
pub mod tag {
    pub const PROJECTION: u64 = 0x5052_4f4a;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const DATA: u64 = 0x4441_5441;
    pub const METHOD: u64 = 0x4d45_5448;
    pub const PERMUTATION: u64 = 0x5045_524d;
    pub const ORDER_STEP: u64 = 0x5354_4550;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

pub fn substream(seed: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag, index))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
