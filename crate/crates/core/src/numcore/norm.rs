use crate::error::{Error, Result};

use super::{join, Mode, Module, Real, Tensor};

/// Per-channel batch normalization over `N x C x H x W` with learned affine
/// scale/shift and exponential running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm2d<F: Real = f32> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    /// Weight kept on the old running statistic at each update.
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct BnCache<F> {
    mode: Mode,
    shape: [usize; 4],
    xhat: Vec<F>,
    inv_std: Vec<F>,
    batch_mean: Vec<F>,
    batch_var: Vec<F>,
}

impl<F: Real> BatchNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::param(&[channels], vec![F::one(); channels]).expect("gamma"),
            beta: Tensor::param(&[channels], vec![F::zero(); channels]).expect("beta"),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::from_vec(&[channels], vec![F::one(); channels]).expect("var"),
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Tensor<F>, mode: Mode) -> Result<(Tensor<F>, BnCache<F>)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.channels() {
            return Err(Error::shape(
                "batch_norm",
                format!("N x {} x H x W", self.channels()),
                format!("{s:?}"),
            ));
        }
        let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
        let count = F::from_usize(n * hw).expect("count");
        let eps = F::lit(self.eps);
        let mut batch_mean = vec![F::zero(); c];
        let mut batch_var = vec![F::zero(); c];
        let (mean, var): (Vec<F>, Vec<F>) = match mode {
            Mode::Train => {
                for ch in 0..c {
                    let mut sum = F::zero();
                    for i in 0..n {
                        let start = (i * c + ch) * hw;
                        sum += x.data()[start..start + hw].iter().copied().sum::<F>();
                    }
                    let mu = sum / count;
                    let mut sq = F::zero();
                    for i in 0..n {
                        let start = (i * c + ch) * hw;
                        sq += x.data()[start..start + hw]
                            .iter()
                            .map(|&v| (v - mu) * (v - mu))
                            .sum::<F>();
                    }
                    batch_mean[ch] = mu;
                    batch_var[ch] = sq / count;
                }
                (batch_mean.clone(), batch_var.clone())
            }
            Mode::Eval => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![F::zero(); x.len()];
        let mut y = vec![F::zero(); x.len()];
        for i in 0..n {
            for ch in 0..c {
                let start = (i * c + ch) * hw;
                let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
                for j in start..start + hw {
                    let xh = (x.data()[j] - mean[ch]) * inv_std[ch];
                    xhat[j] = xh;
                    y[j] = g * xh + b;
                }
            }
        }
        let cache = BnCache {
            mode,
            shape: [s[0], s[1], s[2], s[3]],
            xhat,
            inv_std,
            batch_mean,
            batch_var,
        };
        Ok((Tensor::from_vec(s, y)?, cache))
    }

    pub fn backward(&mut self, cache: &BnCache<F>, dy: &Tensor<F>) -> Tensor<F> {
        let [n, c, h, w] = cache.shape;
        let hw = h * w;
        let m = F::from_usize(n * hw).expect("count");
        let mut dgamma = vec![F::zero(); c];
        let mut dbeta = vec![F::zero(); c];
        let mut dx = vec![F::zero(); dy.len()];
        for ch in 0..c {
            let mut sum_dy = F::zero();
            let mut sum_dy_xhat = F::zero();
            for i in 0..n {
                let start = (i * c + ch) * hw;
                for j in start..start + hw {
                    sum_dy += dy.data()[j];
                    sum_dy_xhat += dy.data()[j] * cache.xhat[j];
                }
            }
            dgamma[ch] = sum_dy_xhat;
            dbeta[ch] = sum_dy;
            let g = self.gamma.data()[ch];
            let inv = cache.inv_std[ch];
            for i in 0..n {
                let start = (i * c + ch) * hw;
                for j in start..start + hw {
                    dx[j] = match cache.mode {
                        Mode::Train => {
                            g * inv / m * (m * dy.data()[j] - sum_dy - cache.xhat[j] * sum_dy_xhat)
                        }
                        Mode::Eval => g * inv * dy.data()[j],
                    };
                }
            }
        }
        for (acc, v) in self.gamma.grad_mut().iter_mut().zip(dgamma) {
            *acc += v;
        }
        for (acc, v) in self.beta.grad_mut().iter_mut().zip(dbeta) {
            *acc += v;
        }
        Tensor::from_vec(&cache.shape, dx).expect("bn grad")
    }

    /// Folds the batch statistics of a training-mode pass into the running
    /// estimates (unbiased variance). No-op for eval-mode caches.
    pub fn update_running(&mut self, cache: &BnCache<F>) {
        if cache.mode != Mode::Train {
            return;
        }
        let [n, _, h, w] = cache.shape;
        let m = n * h * w;
        let unbias = if m > 1 {
            F::from_usize(m).unwrap() / F::from_usize(m - 1).unwrap()
        } else {
            F::one()
        };
        let keep = F::lit(self.momentum);
        let take = F::one() - keep;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&cache.batch_mean) {
            *r = keep * *r + take * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&cache.batch_var) {
            *r = keep * *r + take * b * unbias;
        }
    }
}

impl<F: Real> Module<F> for BatchNorm2d<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        out.push((join(prefix, "gamma"), &self.gamma));
        out.push((join(prefix, "beta"), &self.beta));
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        out.push((join(prefix, "gamma"), &mut self.gamma));
        out.push((join(prefix, "beta"), &mut self.beta));
    }

    fn buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        out.push((join(prefix, "running_mean"), &self.running_mean));
        out.push((join(prefix, "running_var"), &self.running_var));
    }

    fn buffers_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        out.push((join(prefix, "running_mean"), &mut self.running_mean));
        out.push((join(prefix, "running_var"), &mut self.running_var));
    }
}
