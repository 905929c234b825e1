//! Seeded random number generation.
//!
//! Everything stochastic in this crate runs off [`ShapeRng`] (ChaCha8): fast,
//! portable across platforms, and seedable from a single `u64`. Per-simulation
//! generators are derived from a master seed with a SplitMix64 mix so that
//! simulation `i` always sees the same stream regardless of how many worker
//! threads ran before it, which keeps parallel builds byte-reproducible.
//!
//! Within one simulation, independent concerns use separate ChaCha streams
//! (parameter draws on one, edge weights on another) so consuming extra values
//! in one phase never perturbs the other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate-wide generator type.
pub type ShapeRng = ChaCha8Rng;

/// Stream id for distribution-parameter draws.
pub const STREAM_PARAMS: u64 = 0;
/// Stream id for lattice edge weights.
pub const STREAM_WEIGHTS: u64 = 1;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a strong 64-bit mix.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for simulation `index` under `master_seed`.
///
/// Distinct indices map to distinct, well-mixed seeds even for small masters.
pub fn derive_sim_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// A generator seeded for one simulation, positioned on `stream`.
pub fn sim_rng(sim_seed: u64, stream: u64) -> ShapeRng {
    let mut rng = ShapeRng::seed_from_u64(sim_seed);
    rng.set_stream(stream);
    rng
}
