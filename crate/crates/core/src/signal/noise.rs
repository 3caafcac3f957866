//! Seeded complex white Gaussian noise.
//!
//! Generator: `ChaCha8Rng` seeded with `seed_from_u64`, whose output stream
//! is fixed by the ChaCha specification and independent of platform.
//! Gaussian transform: the Ziggurat sampler behind `rand_distr::StandardNormal`.
//! For each sample the in-phase draw is taken first, then the quadrature draw.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Complex noise description: `power` is the total mean-square value per
/// sample (half in each quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub power: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(power: f64, seed: u64) -> Self {
        Self { power, seed }
    }
}

/// `len` complex Gaussian samples with total mean-square `power`.
pub fn gaussian_samples(len: usize, power: f64, seed: u64) -> Vec<Complex64> {
    let sigma = (power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let i: f64 = rng.sample(StandardNormal);
            let q: f64 = rng.sample(StandardNormal);
            Complex64::new(sigma * i, sigma * q)
        })
        .collect()
}

/// Derives a child seed for stream `index` of a parent seed (SplitMix64 finalizer).
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
