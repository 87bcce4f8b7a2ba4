//! Seeded random streams.
//!
//! Every Monte Carlo run draws from its own ChaCha stream selected by
//! `(master seed, stream index)`, so runs can execute in any order and still
//! reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for stream `index` under `master`.
pub fn stream(master: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Child seed for a named purpose inside one run.
pub fn sub_seed(master: u64, index: u64, purpose: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng.next_u64()
}
