use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable, seed-reproducible generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
