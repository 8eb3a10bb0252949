//! Deterministic RNG streams.
//!
//! All randomness in the engine flows from one top-level `u64` seed. Loops
//! over permutations or Monte Carlo draws derive an independent stream per
//! index with [`stream`], so the result does not depend on evaluation order
//! and parallel execution would produce identical output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `index` of the family identified by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
