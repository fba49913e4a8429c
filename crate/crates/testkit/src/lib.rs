//! Shared test support: seeded generators for workbooks and series, and
//! slow reference implementations to check the real ones against.

pub mod gen;
pub mod oracle;

pub use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
