//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by `(seed, stream, index)` so that
//! results never depend on the order in which parallel jobs run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent 64-bit seed for job `index` of stream `stream`.
pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(seed ^ splitmix64(stream.wrapping_mul(GOLDEN)));
    splitmix64(a ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    rng(derive(seed, stream, index))
}

// Stream identifiers.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_BATCH: u64 = 2;
pub(crate) const STREAM_PATH: u64 = 3;
pub(crate) const STREAM_BASELINE_SUBSET: u64 = 4;
pub(crate) const STREAM_SII: u64 = 5;
pub(crate) const STREAM_TASK: u64 = 6;
pub(crate) const STREAM_NOISE: u64 = 7;
pub(crate) const STREAM_SPLIT: u64 = 8;
pub(crate) const STREAM_RETRAIN: u64 = 9;
pub(crate) const STREAM_SHUFFLE: u64 = 10;
pub(crate) const STREAM_TASK_TERMS: u64 = 11;
