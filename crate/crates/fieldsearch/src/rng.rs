//! Seed plumbing for reproducible runs.
//!
//! Every stochastic stage (field layout, prior noise, per-episode
//! observation noise, exploration, ...) gets its own rng stream derived
//! from one master seed, so streams stay independent no matter how many
//! draws each stage consumes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for [`derive_seed`]. Keeping them in one place avoids
/// accidental collisions between stages.
pub mod tag {
    pub const FIELD: u64 = 0x01;
    pub const PRIOR: u64 = 0x02;
    pub const OBSERVE: u64 = 0x03;
    pub const RESET: u64 = 0x04;
    pub const EXPLORE: u64 = 0x05;
    pub const BUFFER: u64 = 0x06;
    pub const PARAM_INIT: u64 = 0x07;
    pub const EVAL: u64 = 0x08;
    pub const BASELINE: u64 = 0x09;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a master seed and a stream tag.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// Deterministic rng for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_per_stream() {
        let s = 42;
        let a = derive_seed(s, tag::FIELD);
        let b = derive_seed(s, tag::PRIOR);
        let c = derive_seed(s, tag::OBSERVE);
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_ne!(a, c);
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }
}
