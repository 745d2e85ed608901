//! Seed derivation for independent, scheduling-free random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes, mixed into the derived seed so that e.g. partition
/// sampling and batch shuffling never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ModelInit = 1,
    Partition = 2,
    Batches = 3,
    Participation = 4,
    SyntheticCenters = 5,
    SyntheticSamples = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an ordered tuple of words into one 64-bit seed.
pub fn derive(seed: u64, stream: Stream, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream as u64));
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

pub fn rng(seed: u64, stream: Stream, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, parts))
}
