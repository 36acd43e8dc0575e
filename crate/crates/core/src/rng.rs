//! Reproducible random streams: one ChaCha8 stream per (master seed, index).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in result metadata so runs can be reproduced bit for bit.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(master) + set_stream(index)";

pub fn stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}
