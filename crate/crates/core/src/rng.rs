//! Counter-based seed derivation.
//!
//! Every random stream is addressed by a path `(master, tag, index, ...)` and
//! seeded from a SplitMix64 fold of that path. Streams never share state, so
//! the order in which they are consumed (serially or across threads) cannot
//! change any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags. Keep these stable: they are part of the reproducibility contract.
pub const TAG_TABLE: u64 = 0x7461_626c;
pub const TAG_CONTEXT: u64 = 0x6374_7874;
pub const TAG_TRIAL: u64 = 0x7472_6c73;
pub const TAG_POINTER: u64 = 0x706e_7472;
pub const TAG_CURVE: u64 = 0x6375_7276;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a stream path into a single 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
