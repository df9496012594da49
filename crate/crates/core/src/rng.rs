//! Seed plumbing. Every stochastic component takes an explicit `u64` seed and
//! builds its own generator, so runs are reproducible independent of call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a master seed with a stream tag (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags used across the crate.
pub mod stream {
    pub const TEACHER_INIT: u64 = 1;
    pub const STUDENT_INIT: u64 = 2;
    pub const TEACHER_DROPOUT: u64 = 3;
    pub const STUDENT_DROPOUT: u64 = 4;
    pub const PRETEXT: u64 = 5;
    pub const SPLIT: u64 = 6;
}
