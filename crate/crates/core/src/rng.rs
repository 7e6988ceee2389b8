//! Deterministic random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha::ChaCha8Rng`),
//! a 64-bit-seeded counter-mode generator. A `(seed, stream)` pair selects an
//! independent keystream: the seed keys the cipher and the stream id selects
//! the nonce, so per-column or per-component draws never overlap and do not
//! depend on the order in which they are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used by the generators; kept distinct so that, e.g., the
/// support of `B` never shares a keystream with the values of `Y`.
pub mod streams {
    pub const SUPPORT: u64 = 1 << 40;
    pub const VALUES: u64 = 2 << 40;
    pub const RIGHT: u64 = 3 << 40;
    pub const NOISE: u64 = 4 << 40;
    pub const INIT: u64 = 5 << 40;
    pub const TRIALS: u64 = 6 << 40;
    pub const THIRD: u64 = 7 << 40;
}

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed (splitmix64 finalizer over `seed ^ tag`).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream(7, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, 2), derive_seed(2, 1));
    }
}
