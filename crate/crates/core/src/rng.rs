//! Seeded random streams. Every consumer gets its own ChaCha stream derived
//! from a seed and a stream id, so results do not depend on call order
//! across matches or threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used inside one match.
pub mod streams {
    pub const TASKS: u64 = 0;
    pub const TIE_BREAK: u64 = 1;
    pub const MATCH_TIE: u64 = 2;
    pub const FLEET: u64 = 3;
    /// Agent in slot `i` uses `AGENT_BASE + i`.
    pub const AGENT_BASE: u64 = 16;
}

pub fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Child seed for a path of keys, e.g. `(tournament, pair)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |seed, &key| stream(seed, key).next_u64())
}
