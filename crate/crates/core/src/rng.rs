//! Seeding for reproducible multi-chain runs.
//!
//! Every chain owns its own generator. Chain `c` of a run with seed `S` is
//! seeded with [`chain_seed`]`(S, c)`:
//!
//! ```text
//! chain_seed(S, c) = splitmix64(S ^ splitmix64(c + 1))
//! ```
//!
//! and the stream is ChaCha8 seeded from that 64-bit value. The mixing
//! function is stable across releases; the generator stream itself is not
//! promised to be portable to other implementations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chain_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn chain_rng(seed: u64, index: u64) -> ChainRng {
    rng_from_seed(chain_seed(seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chain_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..64).map(|c| chain_seed(7, c)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), a.len());
        assert_eq!(chain_seed(7, 3), chain_seed(7, 3));
        assert_ne!(chain_seed(7, 3), chain_seed(8, 3));
    }

    #[test]
    fn streams_replay() {
        let mut r1 = chain_rng(42, 1);
        let mut r2 = chain_rng(42, 1);
        for _ in 0..100 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }
}
