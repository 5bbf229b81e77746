use rand::Rng;

use crate::error::{Error, Result};

use super::init::uniform;
use super::ops::{gemm, sigmoid};
use super::{join, Module, Real, Tensor};

/// Single-layer, forward-direction GRU.
///
/// Gate convention:
/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `h̃ = tanh(Wh x + Uh (r ∘ h) + bh)`, `h' = (1 - z) ∘ h + z ∘ h̃`.
#[derive(Clone, Debug)]
pub struct Gru<F: Real = f32> {
    pub w_z: Tensor<F>,
    pub w_r: Tensor<F>,
    pub w_h: Tensor<F>,
    pub u_z: Tensor<F>,
    pub u_r: Tensor<F>,
    pub u_h: Tensor<F>,
    pub b_z: Tensor<F>,
    pub b_r: Tensor<F>,
    pub b_h: Tensor<F>,
}

struct StepCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    rh: Vec<F>,
    cand: Vec<F>,
}

pub struct GruCache<F> {
    n: usize,
    steps: Vec<StepCache<F>>,
}

impl<F: Real> Gru<F> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut w = |rows: usize, cols: usize| {
            Tensor::param(&[rows, cols], uniform(rows * cols, bound, rng)).expect("gru weight")
        };
        let (w_z, w_r, w_h) = (w(hidden, inputs), w(hidden, inputs), w(hidden, inputs));
        let (u_z, u_r, u_h) = (w(hidden, hidden), w(hidden, hidden), w(hidden, hidden));
        let b = || Tensor::param(&[hidden], vec![F::zero(); hidden]).expect("gru bias");
        Gru {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_z.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_z.shape()[0]
    }

    fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden(), self.inputs());
        for (name, t, want) in [
            ("W_r", &self.w_r, vec![h, i]),
            ("W_h", &self.w_h, vec![h, i]),
            ("U_z", &self.u_z, vec![h, h]),
            ("U_r", &self.u_r, vec![h, h]),
            ("U_h", &self.u_h, vec![h, h]),
            ("b_z", &self.b_z, vec![h]),
            ("b_r", &self.b_r, vec![h]),
            ("b_h", &self.b_h, vec![h]),
        ] {
            if t.shape() != want.as_slice() {
                return Err(Error::shape("gru", format!("{name} {want:?}"), format!("{:?}", t.shape())));
            }
        }
        Ok(())
    }

    /// `pre = x W^T + h U^T + b` for an `n`-row batch.
    fn affine(&self, n: usize, x: &[F], w: &Tensor<F>, h: &[F], u: &Tensor<F>, b: &Tensor<F>) -> Vec<F> {
        let (hid, inp) = (self.hidden(), self.inputs());
        let mut out = vec![F::zero(); n * hid];
        for row in out.chunks_mut(hid) {
            row.copy_from_slice(b.data());
        }
        gemm(n, inp, hid, x, false, w.data(), true, F::one(), &mut out);
        gemm(n, hid, hid, h, false, u.data(), true, F::one(), &mut out);
        out
    }

    fn step(&self, n: usize, x: &[F], h: &[F]) -> (Vec<F>, StepCache<F>) {
        let z: Vec<F> = self
            .affine(n, x, &self.w_z, h, &self.u_z, &self.b_z)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<F> = self
            .affine(n, x, &self.w_r, h, &self.u_r, &self.b_r)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<F> = r.iter().zip(h).map(|(&a, &b)| a * b).collect();
        let cand: Vec<F> = self
            .affine(n, x, &self.w_h, &rh, &self.u_h, &self.b_h)
            .into_iter()
            .map(F::tanh)
            .collect();
        let h_new = (0..h.len())
            .map(|j| (F::one() - z[j]) * h[j] + z[j] * cand[j])
            .collect();
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            z,
            r,
            rh,
            cand,
        };
        (h_new, cache)
    }

    /// Runs the sequence `xs` (each `N x inputs`) from a zero state and
    /// returns the final state `N x hidden`.
    pub fn forward(&self, xs: &[Tensor<F>]) -> Result<(Tensor<F>, GruCache<F>)> {
        self.validate()?;
        let first = xs
            .first()
            .ok_or_else(|| Error::InvalidArgument("gru over an empty sequence".into()))?;
        let n = first.shape()[0];
        let mut h = vec![F::zero(); n * self.hidden()];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            if x.shape() != [n, self.inputs()] {
                return Err(Error::shape(
                    "gru",
                    format!("[{n}, {}]", self.inputs()),
                    format!("{:?}", x.shape()),
                ));
            }
            let (h_new, cache) = self.step(n, x.data(), &h);
            steps.push(cache);
            h = h_new;
        }
        Ok((Tensor::from_vec(&[n, self.hidden()], h)?, GruCache { n, steps }))
    }

    /// Backpropagation through time from `dL/dh_T`; returns per-step input
    /// gradients.
    pub fn backward(&mut self, cache: &GruCache<F>, dh_last: &Tensor<F>) -> Vec<Tensor<F>> {
        let (n, hid, inp) = (cache.n, self.hidden(), self.inputs());
        let mut dh = dh_last.data().to_vec();
        let mut dxs = vec![Tensor::zeros(&[n, inp]); cache.steps.len()];
        for (t, s) in cache.steps.iter().enumerate().rev() {
            let mut dh_prev: Vec<F> = dh.iter().zip(&s.z).map(|(&d, &z)| d * (F::one() - z)).collect();
            let mut da_z = vec![F::zero(); n * hid];
            let mut da_h = vec![F::zero(); n * hid];
            for j in 0..n * hid {
                let dz = dh[j] * (s.cand[j] - s.h_prev[j]);
                let dc = dh[j] * s.z[j];
                da_h[j] = dc * (F::one() - s.cand[j] * s.cand[j]);
                da_z[j] = dz * s.z[j] * (F::one() - s.z[j]);
            }
            let dx = dxs[t].data_mut();
            // candidate path
            gemm(hid, n, inp, &da_h, true, &s.x, false, F::one(), self.w_h.grad_mut());
            gemm(hid, n, hid, &da_h, true, &s.rh, false, F::one(), self.u_h.grad_mut());
            accumulate_rows(self.b_h.grad_mut(), &da_h);
            gemm(n, hid, inp, &da_h, false, self.w_h.data(), false, F::one(), dx);
            let mut drh = vec![F::zero(); n * hid];
            gemm(n, hid, hid, &da_h, false, self.u_h.data(), false, F::zero(), &mut drh);
            let mut da_r = vec![F::zero(); n * hid];
            for j in 0..n * hid {
                dh_prev[j] += drh[j] * s.r[j];
                let dr = drh[j] * s.h_prev[j];
                da_r[j] = dr * s.r[j] * (F::one() - s.r[j]);
            }
            // reset and update gates
            for (da, w, u, b) in [
                (&da_r, &mut self.w_r, &mut self.u_r, &mut self.b_r),
                (&da_z, &mut self.w_z, &mut self.u_z, &mut self.b_z),
            ] {
                gemm(hid, n, inp, da, true, &s.x, false, F::one(), w.grad_mut());
                gemm(hid, n, hid, da, true, &s.h_prev, false, F::one(), u.grad_mut());
                accumulate_rows(b.grad_mut(), da);
                gemm(n, hid, inp, da, false, w.data(), false, F::one(), dx);
                gemm(n, hid, hid, da, false, u.data(), false, F::one(), &mut dh_prev);
            }
            dh = dh_prev;
        }
        dxs
    }
}

fn accumulate_rows<F: Real>(acc: &mut [F], rows: &[F]) {
    for row in rows.chunks(acc.len()) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}

impl<F: Real> Module<F> for Gru<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        for (name, t) in [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ] {
            out.push((join(prefix, name), t));
        }
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        for (name, t) in [
            ("w_z", &mut self.w_z),
            ("w_r", &mut self.w_r),
            ("w_h", &mut self.w_h),
            ("u_z", &mut self.u_z),
            ("u_r", &mut self.u_r),
            ("u_h", &mut self.u_h),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ] {
            out.push((join(prefix, name), t));
        }
    }
}

/// One GRU update for a single input vector `x` and state `h`.
pub fn gru_step<F: Real>(x: &[F], h: &[F], params: &Gru<F>) -> Result<Vec<F>> {
    params.validate()?;
    if x.len() != params.inputs() || h.len() != params.hidden() {
        return Err(Error::shape(
            "gru_step",
            format!("x[{}], h[{}]", params.inputs(), params.hidden()),
            format!("x[{}], h[{}]", x.len(), h.len()),
        ));
    }
    Ok(params.step(1, x, h).0)
}
