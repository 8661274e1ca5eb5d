//! Seeded randomness.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), keyed
//! by a single 64-bit seed through `ChaCha8Rng::seed_from_u64`, with a fixed
//! stream id per purpose selected via `set_stream`. Two experiments with the
//! same seed therefore never share a keystream unless they share a purpose.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    HardSet = 1,
    PacSample = 2,
    Stream = 3,
    Instance = 4,
}

pub fn rng_for(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = rng_for(7, Purpose::HardSet).gen();
        let b: u64 = rng_for(7, Purpose::HardSet).gen();
        let c: u64 = rng_for(7, Purpose::PacSample).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
