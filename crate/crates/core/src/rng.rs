//! Seeded generators. All randomness in the crate flows through ChaCha8 so
//! that a seed reproduces the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used by the training loops.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const DROP: u64 = 2;
    pub const NEGATIVES: u64 = 3;
    pub const SPLIT: u64 = 4;
}
