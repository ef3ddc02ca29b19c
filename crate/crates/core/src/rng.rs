//! Seeded random streams. Every consumer gets its own ChaCha stream derived from the
//! master seed, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage labels mixed into the master seed.
pub mod domain {
    pub const SYNTH: u64 = 0x5359_4e54;
    pub const RANDOM_ATTACK: u64 = 0x5241_4e44;
    pub const CRITICAL_PICK: u64 = 0x4352_4954;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const EVAL_SUITE: u64 = 0x4556_414c;
}

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.rotate_left(32));
    rng.set_stream(index);
    rng
}
