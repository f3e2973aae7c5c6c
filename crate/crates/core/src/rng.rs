//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! keyed by a master seed and a small tuple of indices, so that parallel and
//! sequential execution produce the same bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for sample `sample` at 16-adic scale `scale`.
pub fn scale_rng(master: u64, sample: u64, scale: i32) -> Rng {
    rng_from_seed(derive_seed(master, &[sample, scale as i64 as u64]))
}
