//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator seeded from a 64-bit value.
//! Child seeds are derived from a master seed and a path of labels (for
//! example `[cell, replicate, role]`) by chained SplitMix64 mixing, so the
//! value a task receives depends only on its labels and never on which
//! worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels used as the last path component to separate the simulation and
/// the search streams of one replicate.
pub const ROLE_SIMULATE: u64 = 0x5349_4d55;
pub const ROLE_SEARCH: u64 = 0x5345_4152;
pub const ROLE_BOOTSTRAP: u64 = 0x424f_4f54;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
