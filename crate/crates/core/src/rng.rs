//! Reproducible random streams.
//!
//! Every consumer of randomness owns a ChaCha8 stream derived from a master
//! seed and a stream index, so parallel workers stay bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream index for a named consumer (FNV-1a of the name).
pub fn named_stream_index(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn named_stream(seed: u64, name: &str) -> StreamRng {
    stream(seed, named_stream_index(name))
}
