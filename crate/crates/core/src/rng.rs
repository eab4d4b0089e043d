//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream cipher keyed by
//! the run seed. ChaCha is a counter-based generator: the 32-byte key is the
//! run seed expanded with SplitMix64, and each consumer selects its own 64-bit
//! stream id, so the sequence seen by one component never depends on how many
//! values another component consumed. Output words are the ChaCha8 keystream
//! read in block order, exactly as `rand_chacha::ChaCha8Rng` produces them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Sampler = 2,
    Generator = 3,
    Validation = 4,
}

pub type Rng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = stream_rng(7, Stream::Init);
        let mut r2 = stream_rng(7, Stream::Init);
        let mut r3 = stream_rng(7, Stream::Sampler);
        let x1: u64 = r1.random();
        assert_eq!(x1, r2.random::<u64>());
        assert_ne!(x1, r3.random::<u64>());
    }
}
