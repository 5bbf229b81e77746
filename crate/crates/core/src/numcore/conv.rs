use rand::Rng;

use crate::error::{Error, Result};

use super::init::{fan_in_bound, uniform};
use super::ops::gemm;
use super::{join, Module, Real, Tensor};

/// Unfolds one `c x h x w` sample into a `(c*k*k) x (h*w)` patch matrix for a
/// same-padded `k x k` convolution.
pub(crate) fn im2col<F: Real>(x: &[F], c: usize, h: usize, w: usize, k: usize, cols: &mut [F]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let out = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.iter_mut().for_each(|v| *v = F::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (xo, o) in out.iter_mut().enumerate() {
                        let sx = xo as isize + dx;
                        *o = if sx < 0 || sx >= w as isize {
                            F::zero()
                        } else {
                            src[sx as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-matrix gradients back onto the input.
pub(crate) fn col2im_add<F: Real>(cols: &[F], c: usize, h: usize, w: usize, k: usize, dx: &mut [F]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let ddx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    for xo in 0..w {
                        let sx = xo as isize + ddx;
                        if sx >= 0 && sx < w as isize {
                            dst[sx as usize] += src[y * w + xo];
                        }
                    }
                }
            }
        }
    }
}

/// Same-padded 2-D convolution (stride 1, odd kernel size).
#[derive(Clone, Debug)]
pub struct Conv2d<F: Real = f32> {
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Saved activations of a batched forward pass.
#[derive(Clone, Debug)]
pub struct ConvCache<F> {
    pub(crate) cols: Vec<F>,
    pub(crate) n: usize,
    pub(crate) h: usize,
    pub(crate) w: usize,
}

impl<F: Real> Conv2d<F> {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, k: usize, rng: &mut R) -> Self {
        let fan_in = c_in * k * k;
        let kernel = uniform(c_out * fan_in, fan_in_bound(fan_in), rng);
        Conv2d {
            kernel: Tensor::param(&[c_out, c_in, k, k], kernel).expect("kernel shape"),
            bias: Tensor::param(&[c_out], vec![F::zero(); c_out]).expect("bias shape"),
        }
    }

    pub fn from_parts(kernel: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        let ks = kernel.shape();
        if ks.len() != 4 || ks[2] != ks[3] || ks[2] % 2 == 0 {
            return Err(Error::shape(
                "conv2d",
                "kernels C_out x C_in x k x k with odd k",
                format!("{ks:?}"),
            ));
        }
        if bias.shape() != [ks[0]] {
            return Err(Error::shape(
                "conv2d",
                format!("bias [{}]", ks[0]),
                format!("bias {:?}", bias.shape()),
            ));
        }
        Ok(Conv2d { kernel, bias })
    }

    pub fn c_out(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn k(&self) -> usize {
        self.kernel.shape()[2]
    }

    fn check_input(&self, x: &Tensor<F>) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.c_in() {
            return Err(Error::shape(
                "conv2d",
                format!("input N x {} x H x W (kernels {:?})", self.c_in(), self.kernel.shape()),
                format!("{s:?}"),
            ));
        }
        Ok((s[0], s[2], s[3]))
    }

    /// Patch matrices for every sample of an `N x C x H x W` batch.
    pub(crate) fn unfold(&self, x: &Tensor<F>) -> Result<ConvCache<F>> {
        let (n, h, w) = self.check_input(x)?;
        let (c, k) = (self.c_in(), self.k());
        let rows = c * k * k;
        let hw = h * w;
        let mut cols = vec![F::zero(); n * rows * hw];
        for i in 0..n {
            im2col(
                &x.data()[i * c * hw..(i + 1) * c * hw],
                c,
                h,
                w,
                k,
                &mut cols[i * rows * hw..(i + 1) * rows * hw],
            );
        }
        Ok(ConvCache { cols, n, h, w })
    }

    pub(crate) fn apply_cols(&self, cache: &ConvCache<F>) -> Tensor<F> {
        let (n, hw) = (cache.n, cache.h * cache.w);
        let c_out = self.c_out();
        let rows = self.c_in() * self.k() * self.k();
        let mut out = vec![F::zero(); n * c_out * hw];
        for i in 0..n {
            let y = &mut out[i * c_out * hw..(i + 1) * c_out * hw];
            gemm(
                c_out,
                rows,
                hw,
                self.kernel.data(),
                false,
                &cache.cols[i * rows * hw..(i + 1) * rows * hw],
                false,
                F::zero(),
                y,
            );
            for (co, &b) in self.bias.data().iter().enumerate() {
                y[co * hw..(co + 1) * hw].iter_mut().for_each(|v| *v += b);
            }
        }
        Tensor::from_vec(&[n, c_out, cache.h, cache.w], out).expect("conv output")
    }

    /// Accumulates kernel/bias gradients and adds the patch-matrix gradient
    /// into `dcols`.
    pub(crate) fn backward_cols(&mut self, cache: &ConvCache<F>, dy: &[F], dcols: &mut [F]) {
        let (n, hw) = (cache.n, cache.h * cache.w);
        let c_out = self.c_out();
        let rows = self.c_in() * self.k() * self.k();
        {
            let dk = self.kernel.grad_mut();
            for i in 0..n {
                gemm(
                    c_out,
                    hw,
                    rows,
                    &dy[i * c_out * hw..(i + 1) * c_out * hw],
                    false,
                    &cache.cols[i * rows * hw..(i + 1) * rows * hw],
                    true,
                    F::one(),
                    dk,
                );
            }
        }
        {
            let db = self.bias.grad_mut();
            for i in 0..n {
                for (co, g) in db.iter_mut().enumerate() {
                    let start = (i * c_out + co) * hw;
                    *g += dy[start..start + hw].iter().copied().sum::<F>();
                }
            }
        }
        for i in 0..n {
            gemm(
                rows,
                c_out,
                hw,
                self.kernel.data(),
                true,
                &dy[i * c_out * hw..(i + 1) * c_out * hw],
                false,
                F::one(),
                &mut dcols[i * rows * hw..(i + 1) * rows * hw],
            );
        }
    }

    pub(crate) fn fold(&self, cache: &ConvCache<F>, dcols: &[F]) -> Tensor<F> {
        let (n, h, w) = (cache.n, cache.h, cache.w);
        let (c, k) = (self.c_in(), self.k());
        let rows = c * k * k;
        let hw = h * w;
        let mut dx = vec![F::zero(); n * c * hw];
        for i in 0..n {
            col2im_add(
                &dcols[i * rows * hw..(i + 1) * rows * hw],
                c,
                h,
                w,
                k,
                &mut dx[i * c * hw..(i + 1) * c * hw],
            );
        }
        Tensor::from_vec(&[n, c, h, w], dx).expect("conv input grad")
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, ConvCache<F>)> {
        let cache = self.unfold(x)?;
        Ok((self.apply_cols(&cache), cache))
    }

    /// Returns the input gradient; parameter gradients accumulate in place.
    pub fn backward(&mut self, cache: &ConvCache<F>, dy: &Tensor<F>) -> Tensor<F> {
        let mut dcols = vec![F::zero(); cache.cols.len()];
        self.backward_cols(cache, dy.data(), &mut dcols);
        self.fold(cache, &dcols)
    }
}

impl<F: Real> Module<F> for Conv2d<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        out.push((join(prefix, "kernel"), &self.kernel));
        out.push((join(prefix, "bias"), &self.bias));
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        out.push((join(prefix, "kernel"), &mut self.kernel));
        out.push((join(prefix, "bias"), &mut self.bias));
    }
}

/// Single-sample same-padded convolution of a `C_in x H x W` input with
/// `C_out x C_in x k x k` kernels.
pub fn conv2d<F: Real>(input: &Tensor<F>, kernels: &Tensor<F>, bias: &Tensor<F>) -> Result<Tensor<F>> {
    let s = input.shape();
    if s.len() != 3 || kernels.rank() != 4 || kernels.shape()[1] != s[0] {
        return Err(Error::shape(
            "conv2d",
            format!("input C_in x H x W matching kernels {:?}", kernels.shape()),
            format!("input {s:?}"),
        ));
    }
    let layer = Conv2d::from_parts(kernels.clone(), bias.clone())?;
    let x = input.clone().reshape(&[1, s[0], s[1], s[2]])?;
    let (y, _) = layer.forward(&x)?;
    let c_out = layer.c_out();
    y.reshape(&[c_out, s[1], s[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute(x: &[f64], c: usize, h: usize, w: usize, kern: &[f64], co: usize, k: usize, b: &[f64]) -> Vec<f64> {
        let p = (k / 2) as isize;
        let mut out = vec![0.0; co * h * w];
        for o in 0..co {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = b[o];
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - p;
                                let sx = xx as isize + kx as isize - p;
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                                    acc += x[(ci * h + sy as usize) * w + sx as usize]
                                        * kern[((o * c + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    out[(o * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_vec(&[2, 5, 6], uniform::<f64, _>(60, 1.0, &mut rng)).unwrap();
        let mut k = vec![0.0; 2 * 2 * 9];
        k[4] = 1.0; // out 0 <- in 0 center
        k[(2 + 1) * 9 + 4] = 1.0; // out 1 <- in 1 center
        let kern = Tensor::from_vec(&[2, 2, 3, 3], k).unwrap();
        let bias = Tensor::zeros(&[2]);
        let y = conv2d(&x, &kern, &bias).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn ones_kernel_on_small_plane_sums_the_ones() {
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0f64; 4]).unwrap();
        let kern = Tensor::from_vec(&[1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &kern, &Tensor::zeros(&[1])).unwrap();
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = uniform::<f64, _>(16, 1.0, &mut rng);
        let kern = uniform::<f64, _>(18, 1.0, &mut rng);
        let b = uniform::<f64, _>(2, 1.0, &mut rng);
        let y = conv2d(
            &Tensor::from_vec(&[1, 4, 4], x.clone()).unwrap(),
            &Tensor::from_vec(&[2, 1, 3, 3], kern.clone()).unwrap(),
            &Tensor::from_vec(&[2], b.clone()).unwrap(),
        )
        .unwrap();
        let want = brute(&x, 1, 4, 4, &kern, 2, 3, &b);
        for (a, e) in y.data().iter().zip(&want) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let x = Tensor::<f32>::zeros(&[3, 4, 4]);
        let kern = Tensor::zeros(&[2, 1, 3, 3]);
        let err = conv2d(&x, &kern, &Tensor::zeros(&[2])).unwrap_err().to_string();
        assert!(err.contains("[3, 4, 4]") && err.contains("[2, 1, 3, 3]"), "{err}");
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut layer = Conv2d::<f64>::new(2, 3, 3, &mut rng);
        layer.bias = Tensor::param(&[3], uniform(3, 0.5, &mut rng)).unwrap();
        let x = Tensor::from_vec(&[2, 2, 4, 5], uniform(80, 1.0, &mut rng)).unwrap();
        let wts = uniform::<f64, _>(2 * 3 * 20, 1.0, &mut rng);
        let loss = |l: &Conv2d<f64>, x: &Tensor<f64>| -> f64 {
            let (y, _) = l.forward(x).unwrap();
            y.data().iter().zip(&wts).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = layer.forward(&x).unwrap();
        let dy = Tensor::from_vec(&[2, 3, 4, 5], wts.clone()).unwrap();
        let dx = layer.backward(&cache, &dy);
        let h = 1e-6;
        for idx in [0, 7, 23, 54] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let num = (loss(&layer, &xp) - loss(&layer, &xm)) / (2.0 * h);
            assert!((num - dx.data()[idx]).abs() < 1e-7);
        }
        for idx in [0, 13, 40, 53] {
            let mut lp = layer.clone();
            lp.kernel.data_mut()[idx] += h;
            let mut lm = layer.clone();
            lm.kernel.data_mut()[idx] -= h;
            let num = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
            assert!((num - layer.kernel.grad().unwrap()[idx]).abs() < 1e-7);
        }
        let db: f64 = wts[0..20].iter().chain(&wts[60..80]).sum();
        assert!((layer.bias.grad().unwrap()[0] - db).abs() < 1e-12);
    }
}
