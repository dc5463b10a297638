//! Counter-based random streams.
//!
//! Every Monte Carlo trial draws from its own ChaCha8 stream: the key is
//! derived from `(seed, lane)` and the 64-bit stream id is the trial index.
//! Trials can therefore run in any order on any number of threads and still
//! see exactly the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags, so that the training draw, the ghost draw and the test draw
/// of one trial never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    Train = 1,
    Ghost = 2,
    Test = 3,
    Calibrate = 4,
    Search = 5,
    Sigma = 6,
    Reference = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, lane, index)`.
pub fn stream(seed: u64, lane: Lane, index: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(lane as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Stream for callers that only have a seed (single draws, CLI one-offs).
pub fn seeded(seed: u64) -> ChaCha8Rng {
    stream(seed, Lane::Train, 0)
}
