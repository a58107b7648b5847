//! Deterministic seed derivation.
//!
//! Every randomized step draws from its own ChaCha stream keyed by
//! `(master seed, domain, index)`, so results never depend on execution
//! order or on how work is spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SCENE: u64 = 0x5343_454e;
pub const DROPS: u64 = 0x4452_4f50;
pub const DEPLOYMENT: u64 = 0x4445_504c;
pub const TRAIN_DROPS: u64 = 0x5444_5250;
pub const VAL_DROPS: u64 = 0x5644_5250;
pub const TRAIN_SHADOW: u64 = 0x5453_4844;
pub const VAL_SHADOW: u64 = 0x5653_4844;
pub const SHADOW: u64 = 0x5348_4457;
pub const PERTURB: u64 = 0x5045_5254;
pub const REBALANCE: u64 = 0x5245_424c;
pub const SPLIT: u64 = 0x5350_4c54;
pub const FOREST: u64 = 0x464f_5245;
pub const TREE: u64 = 0x5452_4545;
pub const REPLICATE: u64 = 0x5245_504c;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed, a domain tag and an index into a child seed.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ domain) ^ index)
}

pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, index))
}
