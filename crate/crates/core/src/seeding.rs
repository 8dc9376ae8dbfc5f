//! Deterministic splitting of one user seed into independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named consumers of randomness. Each gets its own ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Dataset = 1,
    EncoderInit = 2,
    CanonicalSample = 3,
    Ordering = 4,
    Episodes = 5,
    Probe = 6,
    Bench = 7,
    Eval = 8,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Seed for the `index`-th item of a stream, for per-item reproducibility.
pub fn item_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
