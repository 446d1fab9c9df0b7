//! Deterministic stream derivation for parallel replication.
//!
//! Every replication, bootstrap replicate and frozen-parameter draw consumes
//! its own ChaCha stream whose seed is derived from the master seed by a
//! splittable counter scheme. Work can therefore be scheduled on any number
//! of threads, in any order, without changing a single draw.
//!
//! Draw domains are additionally separated by the ChaCha stream id, so two
//! domains never overlap even in the (astronomically unlikely) event of a
//! derived-seed collision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream id for the per-replication panel draws.
pub const STREAM_PANEL: u64 = 0;
/// Stream id for unit parameters that are frozen across replications.
pub const STREAM_FROZEN_UNITS: u64 = 1;
/// Stream id for bootstrap sign draws.
pub const STREAM_BOOTSTRAP: u64 = 2;
/// Stream id for the asset-panel draws of the two-step demo design.
pub const STREAM_ASSET: u64 = 3;

/// Mixes a seed with a counter through the SplitMix64 finalizer.
///
/// The map avalanches every input bit, so consecutive counters produce
/// unrelated seeds.
pub fn mix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for the substream identified by `(seed, counter)` within a draw domain.
pub fn substream(seed: u64, counter: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed, counter));
    rng.set_stream(stream);
    rng
}

/// Draws `n` independent standard normal variates.
pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
