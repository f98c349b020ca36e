//! Deterministic random streams.
//!
//! Every stochastic draw in the simulator comes from a `ChaCha8Rng` whose
//! 64-bit seed is derived from a base seed and a path of stream indices
//! (repetition, station, subfield, ...). Derivation folds each index into the
//! state with the SplitMix64 finalizer, so streams are independent of the
//! order in which they are consumed and of thread scheduling.
//!
//! ChaCha8 is a counter-based generator with a fixed, published
//! specification, which makes output reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 increment (the 64-bit golden ratio).
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
/// SplitMix64 finalizer multipliers (Stafford variant 13).
const MIX_MUL_1: u64 = 0xbf58_476d_1ce4_e5b9;
const MIX_MUL_2: u64 = 0x94d0_49bb_1331_11eb;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of stream indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base.wrapping_add(GOLDEN_GAMMA)), |acc, &idx| {
        mix64(acc ^ mix64(idx.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// FNV-1a hash of a label, used to turn station labels into stream indices.
pub fn label_index(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Opens the random stream identified by `base` and `path`.
pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
