//! Counter-based seed derivation.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is
//! derived from a master seed and a `(component, index)` pair, so runs can be
//! reproduced piecewise and arms of a sweep share identical initial designs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the components that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Optimizer = 1,
    TrainingDesign = 2,
    Candidates = 3,
    Seeds = 4,
    Swarm = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(seed);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}
