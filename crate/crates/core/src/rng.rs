//! Reproducible random number streams.
//!
//! Every stochastic routine in this crate takes an `impl Rng` argument rather
//! than owning its randomness. Call sites that need several independent
//! streams derived from one user-facing seed (parallel replicas, per-command
//! substreams) should use [`seeded_stream`]: ChaCha supports 2^64 independent
//! streams per seed, so distinct `stream` values never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds the `stream`-th independent generator for a given seed.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
