//! Root-seed fan-out.
//!
//! Every random stream in a run is a ChaCha8 stream keyed by the root seed and
//! selected by a fixed stream id, so adding a new consumer (a new id) never
//! shifts the numbers drawn by existing ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const POLICY_INIT: u64 = 1;
pub const ACTION_NOISE: u64 = 2;
pub const PPO_SHUFFLE: u64 = 3;
pub const HASHER_INIT: u64 = 4;
pub const HASH_PROJECTION: u64 = 5;
pub const HASHER_BATCH: u64 = 6;
pub const REGION_CLUSTERING: u64 = 7;
pub const EVALUATION: u64 = 8;
pub const CLUSTER_EXPORT: u64 = 9;
/// Environment instance `n` uses stream `ENV_BASE + n`.
pub const ENV_BASE: u64 = 1 << 32;

/// Generator for stream `stream` under `root`.
pub fn stream_rng(root: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng
}

/// A single 64-bit child seed for stream `stream` under `root`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    stream_rng(root, stream).next_u64()
}
