use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;

use crate::error::{Error, Result};

use super::Real;

/// Probability clamp applied before taking logarithms in the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Max-subtracted softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Result<Vec<F>> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "softmax input: logit {i} is {}",
            logits[i]
        )));
    }
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Vector-Jacobian product of softmax: given `p = softmax(z)` and `dL/dp`,
/// returns `dL/dz`.
pub fn softmax_backward<F: Real>(p: &[F], dp: &[F]) -> Vec<F> {
    let dot: F = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    p.iter().zip(dp).map(|(&pi, &di)| pi * (di - dot)).collect()
}

fn check_label<F: Real>(y: F) -> Result<()> {
    if y == F::zero() || y == F::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "binary cross-entropy label must be 0 or 1, got {y}"
        )))
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped to `[BCE_EPS, 1-BCE_EPS]`.
pub fn binary_cross_entropy<F: Real>(p: F, y: F) -> Result<F> {
    check_label(y)?;
    let eps = F::lit(BCE_EPS);
    let p = p.max(eps).min(F::one() - eps);
    Ok(-(y * p.ln() + (F::one() - y) * (F::one() - p).ln()))
}

/// Cross-entropy of `sigmoid(logit)` against `y`, with its derivative with
/// respect to the logit, `sigmoid(logit) - y`.
pub fn bce_with_logit<F: Real>(logit: F, y: F) -> Result<(F, F, F)> {
    let p = sigmoid(logit);
    let loss = binary_cross_entropy(p, y)?;
    Ok((p, loss, p - y))
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<F: Real, R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<F> {
    let keep = F::lit(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep })
        .collect()
}

/// `c = beta * c + op(a) * op(b)` on row-major slices, where `op(a)` is
/// `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<F: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[F],
    trans_a: bool,
    b: &[F],
    trans_b: bool,
    beta: F,
    c: &mut [F],
) {
    let a = if trans_a {
        ArrayView2::from_shape((k, m), a).expect("gemm a").reversed_axes()
    } else {
        ArrayView2::from_shape((m, k), a).expect("gemm a")
    };
    let b = if trans_b {
        ArrayView2::from_shape((n, k), b).expect("gemm b").reversed_axes()
    } else {
        ArrayView2::from_shape((k, n), b).expect("gemm b")
    };
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("gemm c");
    general_mat_mul(F::one(), &a, &b, beta, &mut c);
}
