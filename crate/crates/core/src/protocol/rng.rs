//! Counter-based random streams keyed by `(seed, trial, round, agent)`.
//!
//! The seed is the ChaCha8 key, `(trial, round)` selects the 64-bit stream
//! nonce, and each agent reads from its own `2^32`-word window of that stream.
//! A draw therefore depends only on its coordinates, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Round index reserved for drawing initial conditions.
pub const INIT_ROUND: u32 = u32::MAX;

/// Agent window reserved for aggregate-level draws within a round.
pub const AGGREGATE_LANE: u64 = u32::MAX as u64;

/// Generator positioned at the start of the `(trial, round)` stream.
pub fn round_rng(seed: u64, trial: u32, round: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(trial) << 32) | u64::from(round));
    rng
}

/// Copy of `base` moved to the window of `agent`.
pub fn lane(base: &ChaCha8Rng, agent: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_word_pos(u128::from(agent) << 32);
    rng
}

/// Generator for the `agent` window of the `(trial, round)` stream.
pub fn agent_rng(seed: u64, trial: u32, round: u32, agent: u64) -> ChaCha8Rng {
    lane(&round_rng(seed, trial, round), agent)
}
