//! Seeded random streams.
//!
//! All randomness in a run flows from one seed, fanned out into named
//! sub-streams so adding draws to one consumer (say, dropout) never shifts
//! another (say, parameter init).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams of the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Dropout,
    Gumbel,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::Dropout => 3,
            Stream::Gumbel => 4,
        }
    }
}

/// A deterministic generator for one named sub-stream of `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// In-place Fisher–Yates shuffle driven by the given generator.
pub fn fisher_yates<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
