//! The one generator used throughout: xoshiro256++ seeded through splitmix64.
//!
//! Every stochastic component takes a `&mut Rng` or a seed, so a run is a
//! pure function of its seed. Gaussian draws use the Box-Muller transform,
//! which consumes exactly two uniforms per normal (the second is discarded).

use rand::{Rng as _, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform in [0, 1) with 53 random bits.
pub fn uniform(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_range(rng: &mut Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * uniform(rng)
}

/// Uniform integer in `0..n`.
pub fn below(rng: &mut Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    // 1 - u keeps the log argument in (0, 1].
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn normal(rng: &mut Rng, mean: f64, std_dev: f64) -> f64 {
    mean + std_dev * standard_normal(rng)
}

/// Draws an index from a discrete distribution by inverse CDF.
pub fn categorical(rng: &mut Rng, probs: &[f64]) -> usize {
    let u = uniform(rng);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
