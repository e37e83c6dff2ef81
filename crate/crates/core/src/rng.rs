//! Seed derivation. Every random consumer draws from its own ChaCha stream
//! of the master seed, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for the `index`-th member of a family derived from `seed`.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, index.wrapping_add(1 << 32)).next_u64()
}
