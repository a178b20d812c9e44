//! Counter-based seeding.
//!
//! Every random draw in a trial comes from a ChaCha8 generator whose key
//! is a pure function of `(experiment seed, trial index)` and whose stream
//! id names the purpose of the draw (design, noise, ...). A trial's
//! randomness therefore does not depend on which thread runs it or in what
//! order trials execute.
//!
//! Key derivation: `key = splitmix64(seed ^ splitmix64(trial + 1))`, then
//! `ChaCha8Rng::seed_from_u64(key)` with `set_stream(stream as u64)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Design = 1,
    Noise = 2,
    BetaDirection = 3,
    Rotation = 4,
}

/// Trial index reserved for draws shared by all trials of an experiment.
pub const SHARED_TRIAL: u64 = u64::MAX;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(trial.wrapping_add(1)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream as u64);
    rng
}
