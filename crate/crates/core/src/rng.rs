//! Reproducible random streams.
//!
//! Every Monte Carlo trial draws from ChaCha12 streams keyed by the experiment
//! seed and a purpose tag, with the trial index selecting the stream. A trial's
//! randomness therefore depends only on `(seed, purpose, trial)`, never on how
//! trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a stream is used for. Separate purposes keep, e.g., the channel draws of
/// a trial identical no matter how many noise samples another arm consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Layout = 1,
    Channel = 2,
    Data = 3,
    Noise = 4,
    Pilots = 5,
}

/// Returns the stream for `(seed, purpose, trial)`.
pub fn stream(seed: u64, purpose: Purpose, trial: u64) -> ChaCha12Rng {
    let key = splitmix64(seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut rng = ChaCha12Rng::seed_from_u64(key);
    rng.set_stream(trial);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
