use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numcore::conv::ConvCache;
use crate::numcore::norm::BnCache;
use crate::numcore::ops::dropout_mask;
use crate::numcore::pool::{max_pool2, max_pool2_backward};
use crate::numcore::{join, sigmoid, BatchNorm2d, Conv2d, Mode, Module, Real, Tensor};

/// `maxpool2(relu(bn(conv_v(x) * sigmoid(conv_g(x)))))`, then dropout in
/// training.
#[derive(Clone, Debug)]
pub struct GluBlock<F: Real = f32> {
    pub value: Conv2d<F>,
    pub gate: Conv2d<F>,
    pub bn: BatchNorm2d<F>,
    pub dropout: f64,
}

pub struct GluCache<F: Real> {
    cols: ConvCache<F>,
    value: Vec<F>,
    gate: Vec<F>,
    bn: BnCache<F>,
    normed: Vec<F>,
    relu_shape: Vec<usize>,
    argmax: Vec<u32>,
    mask: Option<Vec<F>>,
}

impl<F: Real> GluCache<F> {
    /// ReLU sign bits followed by pooling winners.
    pub fn fingerprint(&self, out: &mut Vec<u32>) {
        for chunk in self.normed.chunks(32) {
            let mut word = 0u32;
            for (b, &v) in chunk.iter().enumerate() {
                if v > F::zero() {
                    word |= 1 << b;
                }
            }
            out.push(word);
        }
        out.extend_from_slice(&self.argmax);
    }
}

impl<F: Real> GluBlock<F> {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, k: usize, dropout: f64, rng: &mut R) -> Self {
        GluBlock {
            value: Conv2d::new(c_in, c_out, k, rng),
            gate: Conv2d::new(c_in, c_out, k, rng),
            bn: BatchNorm2d::new(c_out),
            dropout,
        }
    }

    pub fn c_in(&self) -> usize {
        self.value.c_in()
    }

    pub fn c_out(&self) -> usize {
        self.value.c_out()
    }

    /// `x` is `N x C_in x H x W`. Dropout is drawn from `rng` only in train
    /// mode; pass `None` for a deterministic pass.
    pub fn forward(&self, x: &Tensor<F>, mode: Mode, rng: Option<&mut ChaCha8Rng>) -> Result<(Tensor<F>, GluCache<F>)> {
        let cols = self.value.unfold(x)?;
        let v = self.value.apply_cols(&cols);
        let g = self.gate.apply_cols(&cols);
        let gate: Vec<F> = g.data().iter().map(|&a| sigmoid(a)).collect();
        let prod: Vec<F> = v.data().iter().zip(&gate).map(|(&a, &s)| a * s).collect();
        let prod = Tensor::from_vec(v.shape(), prod)?;
        let (normed, bn) = self.bn.forward(&prod, mode)?;
        let relu: Vec<F> = normed.data().iter().map(|&a| a.max(F::zero())).collect();
        let relu = Tensor::from_vec(normed.shape(), relu)?;
        let (mut y, argmax) = max_pool2(&relu)?;
        let mask = match (mode, rng) {
            (Mode::Train, Some(rng)) if self.dropout > 0.0 => {
                let m: Vec<F> = dropout_mask(y.len(), self.dropout, rng);
                y.data_mut().iter_mut().zip(&m).for_each(|(a, &k)| *a *= k);
                Some(m)
            }
            _ => None,
        };
        let cache = GluCache {
            cols,
            value: v.into_data(),
            gate,
            bn,
            normed: normed.into_data(),
            relu_shape: relu.shape().to_vec(),
            argmax,
            mask,
        };
        Ok((y, cache))
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `input_grad` is set.
    pub fn backward(&mut self, cache: &GluCache<F>, dy: &Tensor<F>, input_grad: bool) -> Option<Tensor<F>> {
        let mut dy = dy.data().to_vec();
        if let Some(m) = &cache.mask {
            dy.iter_mut().zip(m).for_each(|(a, &k)| *a *= k);
        }
        let mut d = max_pool2_backward(&cache.relu_shape, &cache.argmax, &dy);
        d.data_mut()
            .iter_mut()
            .zip(&cache.normed)
            .for_each(|(a, &v)| {
                if v <= F::zero() {
                    *a = F::zero()
                }
            });
        let dprod = self.bn.backward(&cache.bn, &d);
        let mut dv = vec![F::zero(); dprod.len()];
        let mut dg = vec![F::zero(); dprod.len()];
        for (j, &dp) in dprod.data().iter().enumerate() {
            let s = cache.gate[j];
            dv[j] = dp * s;
            dg[j] = dp * cache.value[j] * s * (F::one() - s);
        }
        let mut dcols = vec![F::zero(); cache.cols.cols.len()];
        self.value.backward_cols(&cache.cols, &dv, &mut dcols);
        self.gate.backward_cols(&cache.cols, &dg, &mut dcols);
        input_grad.then(|| self.value.fold(&cache.cols, &dcols))
    }

    pub fn update_running(&mut self, cache: &GluCache<F>) {
        self.bn.update_running(&cache.bn);
    }
}

impl<F: Real> Module<F> for GluBlock<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        self.value.parameters(&join(prefix, "value"), out);
        self.gate.parameters(&join(prefix, "gate"), out);
        self.bn.parameters(&join(prefix, "bn"), out);
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        self.value.parameters_mut(&join(prefix, "value"), out);
        self.gate.parameters_mut(&join(prefix, "gate"), out);
        self.bn.parameters_mut(&join(prefix, "bn"), out);
    }

    fn buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        self.bn.buffers(&join(prefix, "bn"), out);
    }

    fn buffers_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        self.bn.buffers_mut(&join(prefix, "bn"), out);
    }
}

/// Single-sample convenience over a `C x H x W` input.
pub fn glu_block_forward<F: Real>(x: &Tensor<F>, block: &GluBlock<F>, mode: Mode) -> Result<Tensor<F>> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(crate::error::Error::shape("glu_block", "C x H x W", format!("{s:?}")));
    }
    let batched = x.clone().reshape(&[1, s[0], s[1], s[2]])?;
    let (y, _) = block.forward(&batched, mode, None)?;
    let ys = y.shape().to_vec();
    y.reshape(&ys[1..])
}
