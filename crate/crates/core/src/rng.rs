//! Seed derivation for independent random streams.
//!
//! Every consumer of randomness (initialization, shuffling, sampling, noise)
//! draws from its own ChaCha stream whose seed is a hash of the base seed, a
//! stream tag, and any indices (trial, sample count). Streams therefore do not
//! depend on the order in which work is executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named purposes for derived streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Sample = 3,
    Noise = 4,
    Plant = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and indices into a new seed.
pub fn derive_seed(base: u64, stream: Stream, indices: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ 0x5EED_0000_0000_0000);
    h = splitmix64(h ^ stream as u64);
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

/// A generator for the given stream.
pub fn stream_rng(base: u64, stream: Stream, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(0, Stream::Init, &[]).random();
        let b: u64 = stream_rng(0, Stream::Shuffle, &[]).random();
        let a2: u64 = stream_rng(0, Stream::Init, &[]).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
        assert_ne!(derive_seed(1, Stream::Sample, &[0, 5]), derive_seed(1, Stream::Sample, &[5, 0]));
    }
}
