use rand::Rng;

use crate::error::{Error, Result};

use super::init::{fan_in_bound, uniform};
use super::ops::gemm;
use super::{join, Module, Real, Tensor};

/// Fully connected layer, `y = x W^T + b` on `N x in` batches.
#[derive(Clone, Debug)]
pub struct Dense<F: Real = f32> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Real> Dense<F> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Dense {
            weight: Tensor::param(&[outputs, inputs], uniform(inputs * outputs, fan_in_bound(inputs), rng))
                .expect("weight"),
            bias: Tensor::param(&[outputs], vec![F::zero(); outputs]).expect("bias"),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.inputs() {
            return Err(Error::shape(
                "dense",
                format!("N x {}", self.inputs()),
                format!("{s:?}"),
            ));
        }
        let (n, i, o) = (s[0], self.inputs(), self.outputs());
        let mut y = vec![F::zero(); n * o];
        gemm(n, i, o, x.data(), false, self.weight.data(), true, F::zero(), &mut y);
        for row in y.chunks_mut(o) {
            for (v, &b) in row.iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        Tensor::from_vec(&[n, o], y)
    }

    /// `x` is the forward input; returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
        let (n, i, o) = (x.shape()[0], self.inputs(), self.outputs());
        gemm(o, n, i, dy.data(), true, x.data(), false, F::one(), self.weight.grad_mut());
        let db = self.bias.grad_mut();
        for row in dy.data().chunks(o) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![F::zero(); n * i];
        gemm(n, o, i, dy.data(), false, self.weight.data(), false, F::zero(), &mut dx);
        Tensor::from_vec(&[n, i], dx).expect("dense grad")
    }
}

impl<F: Real> Module<F> for Dense<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        out.push((join(prefix, "weight"), &self.weight));
        out.push((join(prefix, "bias"), &self.bias));
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        out.push((join(prefix, "weight"), &mut self.weight));
        out.push((join(prefix, "bias"), &mut self.bias));
    }
}
