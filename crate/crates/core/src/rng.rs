//! Seed derivation. Every independent unit of work (a country chain, one
//! simulation replication of one posterior draw) gets its own stream derived
//! from the run seed, so results do not depend on thread scheduling.
//!
//! Simulation streams are consumed in a fixed order: for each period, for
//! each country in model order, `k_i` standard normals for the level shocks
//! `e` followed by `k_i` standard normals for the volatility shocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Seed for a named country's chain; independent of model ordering.
pub fn country_seed(seed: u64, code: &str) -> u64 {
    let digest = Sha256::digest(code.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    derive_seed(seed, &[u64::from_le_bytes(b)])
}

pub fn chain_rng(seed: u64, code: &str) -> StreamRng {
    StreamRng::seed_from_u64(country_seed(seed, code))
}

/// Stream for replication `rep` of posterior draw `draw`.
pub fn sim_rng(seed: u64, draw: usize, rep: usize) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, &[draw as u64, rep as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = sim_rng(7, 3, 4).random();
        let b: u64 = sim_rng(7, 3, 4).random();
        let c: u64 = sim_rng(7, 4, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(country_seed(1, "USA"), country_seed(1, "CHN"));
        assert_ne!(country_seed(1, "USA"), country_seed(2, "USA"));
    }
}
