//! Deterministic fan-out from one master seed to independent streams.
//!
//! Every random quantity in a run (payload bits, carrier phases,
//! receiver noise) draws from its own ChaCha stream whose seed is
//! derived from the master seed and a fixed tag path. Derivation is a
//! SplitMix64 chain: starting from the master seed, each tag is mixed
//! in with one SplitMix64 round. Identical seeds and tag paths give
//! identical streams on every platform and at every thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tag for per-trial derivation: `derive(seed, &[TRIAL, trial_index])`.
pub const TRIAL: u64 = 0x7472_6961;
/// Tag for the payload bit stream of a trial.
pub const PAYLOAD: u64 = 0x7061_796c;
/// Tag for a node's receiver noise stream within a trial.
pub const NOISE: u64 = 0x6e6f_6973;
/// Tag for a node's carrier phase draw within a trial.
pub const PHASE: u64 = 0x7068_6173;
/// Tag for per-sweep-cell derivation inside an experiment.
pub const CELL: u64 = 0x6365_6c6c;

/// One SplitMix64 step: advances the state and returns the next word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `seed` and a tag path.
///
/// Each tag is absorbed with one SplitMix64 round, so
/// `derive(s, &[a, b])` equals `derive(derive(s, &[a]), &[b])`.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    for &tag in tags {
        let mut mixer = state ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        state = splitmix64(&mut mixer);
    }
    state
}

/// Opens the ChaCha stream for a derived seed and tag path.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}
