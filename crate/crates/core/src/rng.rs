//! Named, seed-derived random streams.
//!
//! Every random step of a protocol (train/test split, reveal, learner
//! restarts, subsampling) draws from its own stream, derived from the master
//! seed, a stream name and an index. Replicates therefore own independent
//! generators and can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Derives the generator for `(seed, name, index)`.
pub fn stream(seed: u64, name: &str, index: u64) -> StreamRng {
    let key = splitmix(splitmix(seed) ^ fnv1a(name)).wrapping_add(splitmix(index));
    ChaCha8Rng::seed_from_u64(splitmix(key))
}

/// Derives a child seed, for handing to components that take a `u64`.
pub fn child_seed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix(splitmix(seed ^ fnv1a(name)) ^ splitmix(index.wrapping_add(0x5851_f42d)))
}
