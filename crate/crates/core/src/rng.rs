//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a 64-bit seed,
//! with the 64-bit stream id selecting an independent sequence. ChaCha is a
//! counter-based generator, so `(seed, stream)` pins the output on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
