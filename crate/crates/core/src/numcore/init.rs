use rand::Rng;

use super::Real;

/// Uniform samples on `[-bound, bound]`.
pub fn uniform<F: Real, R: Rng + ?Sized>(len: usize, bound: f64, rng: &mut R) -> Vec<F> {
    (0..len)
        .map(|_| F::lit(rng.random_range(-bound..=bound)))
        .collect()
}

/// Fan-in scaled bound giving unit-fan-in variance, `sqrt(3 / fan_in)`.
pub fn fan_in_bound(fan_in: usize) -> f64 {
    (3.0 / fan_in.max(1) as f64).sqrt()
}
