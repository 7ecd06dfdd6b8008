//! Seeded, splittable random streams.
//!
//! Everything stochastic in this crate draws from a `ChaCha8Rng` handed in by
//! the caller. Independent units of work (chain replicates, planner restarts,
//! training examples) each get a derived sub-stream so runs are reproducible
//! and individual pieces are replayable in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

pub fn seeded(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`. ChaCha streams with the
/// same key and different stream numbers never overlap.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
