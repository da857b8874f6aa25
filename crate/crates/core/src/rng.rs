//! Named random streams derived from a single run seed.
//!
//! Every stochastic component of a run draws from its own ChaCha stream so
//! that, for example, changing the replay batch size does not perturb the
//! network initialisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Graph = 1,
    Init = 2,
    Noise = 3,
    Replay = 4,
    Restarts = 5,
}

/// Generator for `stream` under the run seed `seed`.
pub fn stream(seed: u64, stream: Stream) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
