//! Seeded substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`: the seed and domain pick the key, the index picks
//! the 64-bit stream id. Draws for outer iteration `t`, training sample `i` or
//! trial `r` therefore never depend on how many numbers other consumers took.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags that separate independent consumers of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Bootstrap = 1,
    TrainData = 2,
    TestData = 3,
    Generator = 4,
    TrueCoefficients = 5,
    MonteCarlo = 6,
    Trial = 7,
    Erm = 8,
    Instance = 9,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator for one `(seed, domain, index)` address.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// A child seed, e.g. one per experiment trial.
pub fn child_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    substream(seed, domain, index).next_u64()
}
