//! Central-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Real;

/// A scalar-valued, deterministic computation with named parameter groups.
pub trait GradCheckable<F: Real> {
    /// `false` if the forward pass draws randomness (e.g. active dropout).
    fn is_deterministic(&self) -> bool;

    fn groups(&self) -> Vec<(String, usize)>;

    fn get(&self, group: usize, index: usize) -> F;

    fn set(&mut self, group: usize, index: usize, value: F);

    /// Loss plus a fingerprint of every non-smooth branch taken (ReLU signs,
    /// pooling winners). Two evaluations with equal fingerprints lie on the
    /// same smooth piece.
    fn evaluate(&mut self) -> Result<(F, Vec<u32>)>;

    /// Analytic gradient, one vector per group.
    fn gradient(&mut self) -> Result<Vec<Vec<F>>>;
}

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Five-point central stencil (fourth order) instead of the two-point one.
    pub five_point: bool,
    /// Coordinates checked per parameter group (all, when the group is smaller).
    pub samples_per_group: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-3,
            five_point: true,
            samples_per_group: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoordinateError {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: Vec<CoordinateError>,
    /// Coordinates whose perturbation crosses a ReLU or pooling kink.
    pub excluded: Vec<(String, usize)>,
    pub rel_tol: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checked.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordinateError> {
        self.checked
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.rel_tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients with central differences on a random subset
/// of coordinates per parameter group.
pub fn grad_check<F: Real, G: GradCheckable<F> + ?Sized>(
    fragment: &mut G,
    rel_tol: f64,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if !fragment.is_deterministic() {
        return Err(Error::NonDeterministic(
            "disable dropout (or other sampling) before checking gradients".into(),
        ));
    }
    let analytic = fragment.gradient()?;
    let (_, base_pattern) = fragment.evaluate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = F::lit(config.step);
    let mut checked = Vec::new();
    let mut excluded = Vec::new();
    for (g, (name, len)) in fragment.groups().into_iter().enumerate() {
        let picks: Vec<usize> = if len <= config.samples_per_group {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, config.samples_per_group).into_vec();
            v.sort_unstable();
            v
        };
        for idx in picks {
            let orig = fragment.get(g, idx);
            let offsets: &[(f64, f64)] = if config.five_point {
                &[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)]
            } else {
                &[(-1.0, -1.0), (1.0, 1.0)]
            };
            let denom = if config.five_point { 12.0 } else { 2.0 };
            let mut acc = F::zero();
            let mut kink = false;
            for &(k, c) in offsets {
                fragment.set(g, idx, orig + F::lit(k) * h);
                let (v, pattern) = fragment.evaluate()?;
                kink |= pattern != base_pattern;
                acc += F::lit(c) * v;
            }
            fragment.set(g, idx, orig);
            if kink {
                excluded.push((name.clone(), idx));
                continue;
            }
            let numeric = (acc / (F::lit(denom) * h)).as_f64();
            let a = analytic[g][idx].as_f64();
            checked.push(CoordinateError {
                name: name.clone(),
                index: idx,
                analytic: a,
                numeric,
                rel_error: relative_error(a, numeric),
            });
        }
    }
    Ok(GradCheckReport {
        checked,
        excluded,
        rel_tol,
    })
}
