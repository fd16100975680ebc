//! Seeded random streams.
//!
//! Every consumer of randomness takes its own ChaCha stream derived from a
//! user seed, so changing how many draws one component makes never shifts
//! the draws another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Scalar;

pub type Rng = ChaCha8Rng;

pub(crate) const INIT: u64 = 1;
pub(crate) const SHUFFLE: u64 = 2;
pub(crate) const GATE_NOISE: u64 = 3;
pub(crate) const DATA: u64 = 4;
pub(crate) const SPLIT: u64 = 5;

/// Returns the `stream`-th independent sequence for `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a sub-index (repeat, grid cell, ...) into a seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn normal<T: Scalar>(rng: &mut Rng, std_dev: f64) -> T {
    let g: f64 = StandardNormal.sample(rng);
    T::of(g * std_dev)
}
