//! Seed splitting.
//!
//! Every task (a read, a chain, a grid point) draws from its own ChaCha8
//! stream: the generator is seeded from the root seed and the 64-bit stream
//! id selects an independent keystream. Stream ids are built by
//! [`stream_id`] from a task group and an index within the group, so the
//! samples of task k never depend on how many other tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

pub fn rng_for(root_seed: u64, stream: u64) -> TaskRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream);
    rng
}

/// Packs a 24-bit group and a 40-bit index into one stream id.
pub fn stream_id(group: u64, index: u64) -> u64 {
    debug_assert!(group < 1 << 24 && index < 1 << 40);
    (group << 40) | index
}
