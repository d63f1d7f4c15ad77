//! Deterministic random streams derived from a master seed.
//!
//! Every consumer gets its own ChaCha8 stream keyed by `(master, tag, index...)`,
//! so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
pub const TAG_SUBSETS: u64 = 0x7375_6273;
pub const TAG_SPLIT: u64 = 0x7370_6c74;
pub const TAG_ENSEMBLE: u64 = 0x656e_736d;
pub const TAG_TRIAL: u64 = 0x7472_6c73;
pub const TAG_SYNTH: u64 = 0x7379_6e74;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(master: u64, keys: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, keys))
}

/// Stable 64-bit FNV-1a hash, used to key streams by dataset name.
pub fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}
