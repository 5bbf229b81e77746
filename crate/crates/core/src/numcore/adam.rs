use log::warn;

use crate::error::{Error, Result};

use super::{Real, Tensor};

/// Bias-corrected Adam with one moment pair per parameter group.
#[derive(Clone, Debug)]
pub struct AdamState<F: Real = f32> {
    pub step_count: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Real> Default for AdamState<F> {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl<F: Real> AdamState<F> {
    pub fn new(lr: f64) -> Self {
        AdamState {
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn ensure_buffers(&mut self, lens: impl Iterator<Item = usize> + Clone) -> Result<()> {
        if self.m.is_empty() {
            self.m = lens.clone().map(|l| vec![F::zero(); l]).collect();
            self.v = lens.map(|l| vec![F::zero(); l]).collect();
            return Ok(());
        }
        let expected: Vec<usize> = self.m.iter().map(Vec::len).collect();
        let got: Vec<usize> = lens.collect();
        if expected != got {
            return Err(Error::shape("adam_step", format!("{expected:?}"), format!("{got:?}")));
        }
        Ok(())
    }

    /// One update over parallel parameter and gradient groups. A group whose
    /// gradient contains a non-finite value is left untouched. Returns the
    /// indices of skipped groups.
    pub fn step_slices(&mut self, params: &mut [&mut [F]], grads: &[&[F]]) -> Result<Vec<usize>> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} gradient groups", params.len()),
                format!("{}", grads.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("group {i} with {} values", p.len()),
                    format!("{} gradient values", g.len()),
                ));
            }
        }
        self.ensure_buffers(params.iter().map(|p| p.len()))?;
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
        let bc1 = F::one() - b1.powi(t);
        let bc2 = F::one() - b2.powi(t);
        let (lr, eps) = (F::lit(self.lr), F::lit(self.eps));
        let mut skipped = Vec::new();
        for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                warn!("adam: non-finite gradient in parameter group {gi}, update skipped");
                skipped.push(gi);
                continue;
            }
            let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (F::one() - b1) * g[j];
                v[j] = b2 * v[j] + (F::one() - b2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(skipped)
    }

    /// Updates tensors from their own gradient buffers.
    pub fn step(&mut self, params: &mut [&mut Tensor<F>]) -> Result<Vec<usize>> {
        let grads: Vec<Vec<F>> = params
            .iter()
            .map(|p| p.grad().map(<[F]>::to_vec).unwrap_or_else(|| vec![F::zero(); p.len()]))
            .collect();
        let grad_refs: Vec<&[F]> = grads.iter().map(Vec::as_slice).collect();
        let mut slices: Vec<&mut [F]> = params.iter_mut().map(|p| p.data_mut()).collect();
        self.step_slices(&mut slices, &grad_refs)
    }
}

/// Free-function form of [`AdamState::step_slices`].
pub fn adam_step<F: Real>(
    params: &mut [&mut [F]],
    grads: &[&[F]],
    state: &mut AdamState<F>,
) -> Result<Vec<usize>> {
    state.step_slices(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut state = AdamState::<f64>::default();
        let mut p = vec![0.3, -1.2];
        for _ in 0..3 {
            adam_step(&mut [&mut p[..]], &[&[0.0, 0.0]], &mut state).unwrap();
        }
        assert_eq!(p, vec![0.3, -1.2]);
        assert!(state.v[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0f64, -0.02, 1e-3, -250.0] {
            let mut state = AdamState::<f64>::default();
            let mut p = vec![1.0];
            adam_step(&mut [&mut p[..]], &[&[g]], &mut state).unwrap();
            let delta = p[0] - 1.0;
            assert!((delta + 1e-3 * g.signum()).abs() <= 1e-3 * 1e-4, "g={g} delta={delta}");
        }
    }

    #[test]
    fn two_step_trace_constant_gradient() {
        // Hand recurrence with g = 0.5:
        // step 1: m = 0.05, v = 0.00025, m̂ = 0.5, v̂ = 0.25 -> Δ = -0.001 * 0.5 / (0.5 + 1e-8)
        // step 2: m = 0.095, v = 0.00049975, m̂ = 0.095/0.19 = 0.5, v̂ = 0.00049975/0.001999 = 0.25
        let d1 = -0.001 * 0.5 / (0.5 + 1e-8);
        let m2: f64 = 0.9 * 0.05 + 0.1 * 0.5;
        let v2: f64 = 0.999 * 0.00025 + 0.001 * 0.25;
        let d2 = -0.001 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        let mut state = AdamState::<f64>::default();
        let mut p = vec![2.0];
        adam_step(&mut [&mut p[..]], &[&[0.5]], &mut state).unwrap();
        assert!((p[0] - (2.0 + d1)).abs() < 1e-15);
        adam_step(&mut [&mut p[..]], &[&[0.5]], &mut state).unwrap();
        assert!((p[0] - (2.0 + d1 + d2)).abs() < 1e-15);
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn non_finite_group_is_skipped() {
        let mut state = AdamState::<f32>::default();
        let mut a = vec![1.0f32];
        let mut b = vec![1.0f32];
        let skipped = adam_step(&mut [&mut a[..], &mut b[..]], &[&[f32::NAN], &[1.0]], &mut state).unwrap();
        assert_eq!(skipped, vec![0]);
        assert_eq!(a[0], 1.0);
        assert!(b[0] < 1.0);
    }
}
