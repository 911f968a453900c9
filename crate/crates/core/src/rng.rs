//! Seeded randomness for reproducible workloads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the simulator. ChaCha output is stable
/// across platforms and crate releases, which keeps seeded traces portable.
pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
