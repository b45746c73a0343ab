//! Deterministic per-task random streams.
//!
//! Parallel work items each own an independent ChaCha stream selected by a
//! seed and a stream index, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `stream` of the generator family seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream index for the `(outer, inner)` work item; `inner < 2⁴⁰`.
pub fn stream_index(outer: usize, inner: u64) -> u64 {
    debug_assert!(inner < 1 << 40);
    ((outer as u64) << 40) | inner
}
