//! Cross-modal attention: each acoustic event embedding is scaled by the
//! softmax of its scaled dot product with the visual vocalization embedding,
//! then classified by its own sigmoid head.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::ops::softmax_backward;
use crate::numcore::{join, sigmoid, softmax, Dense, Module, Real, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights<F = f32> {
    pub att: [F; 4],
    pub d_k: usize,
}

/// `softmax(q_i . k / sqrt(d))` for the four rows of `q` (`4 x d`, row-major).
pub fn attention_weights<F: Real>(q: &[F], k: &[F]) -> Result<AttentionWeights<F>> {
    let d = k.len();
    if d == 0 || q.len() != 4 * d {
        return Err(Error::shape("attention_weights", format!("Q 4 x {d}, K {d}"), format!("Q {} values", q.len())));
    }
    let scale = F::one() / F::from_usize(d).unwrap().sqrt();
    let logits: Vec<F> = (0..4)
        .map(|i| q[i * d..(i + 1) * d].iter().zip(k).map(|(&a, &b)| a * b).sum::<F>() * scale)
        .collect();
    let p = softmax(&logits)?;
    Ok(AttentionWeights {
        att: [p[0], p[1], p[2], p[3]],
        d_k: d,
    })
}

/// Four independent `E -> 1` sigmoid classifiers, one per event class.
#[derive(Clone, Debug)]
pub struct AvHeads<F: Real = f32> {
    pub heads: Vec<Dense<F>>,
}

pub struct FusionCache<F> {
    q: Vec<F>,
    k: Vec<F>,
    att: Vec<F>,
    fused: Vec<F>,
    n: usize,
    d: usize,
}

/// Batched fusion results.
pub struct FusionOutputs<F: Real> {
    /// `N x 4`.
    pub att: Tensor<F>,
    /// `N x 4 x E`.
    pub fused: Tensor<F>,
    /// `N x 4`.
    pub logits: Tensor<F>,
}

impl<F: Real> AvHeads<F> {
    pub fn new<R: Rng + ?Sized>(embed_dim: usize, rng: &mut R) -> Self {
        AvHeads {
            heads: (0..4).map(|_| Dense::new(embed_dim, 1, rng)).collect(),
        }
    }

    fn logit(&self, i: usize, v: &[F]) -> F {
        let h = &self.heads[i];
        h.weight.data().iter().zip(v).map(|(&w, &x)| w * x).sum::<F>() + h.bias.data()[0]
    }

    /// `q` is `N x 4 x E`, `k` is `N x E`.
    pub fn forward(&self, q: &Tensor<F>, k: &Tensor<F>) -> Result<(FusionOutputs<F>, FusionCache<F>)> {
        let (qs, ks) = (q.shape(), k.shape());
        if qs.len() != 3 || qs[1] != 4 || ks.len() != 2 || ks[0] != qs[0] || ks[1] != qs[2] {
            return Err(Error::shape("fusion", "Q N x 4 x E with K N x E", format!("Q {qs:?}, K {ks:?}")));
        }
        let (n, d) = (qs[0], qs[2]);
        if self.heads[0].inputs() != d {
            return Err(Error::shape("fusion", format!("E = {}", self.heads[0].inputs()), format!("E = {d}")));
        }
        let mut att = Vec::with_capacity(n * 4);
        let mut fused = vec![F::zero(); n * 4 * d];
        let mut logits = Vec::with_capacity(n * 4);
        for s in 0..n {
            let qn = &q.data()[s * 4 * d..(s + 1) * 4 * d];
            let w = attention_weights(qn, &k.data()[s * d..(s + 1) * d])?;
            for i in 0..4 {
                let f = &mut fused[(s * 4 + i) * d..(s * 4 + i + 1) * d];
                for (o, &v) in f.iter_mut().zip(&qn[i * d..(i + 1) * d]) {
                    *o = w.att[i] * v;
                }
                logits.push(self.logit(i, f));
            }
            att.extend_from_slice(&w.att);
        }
        let cache = FusionCache {
            q: q.data().to_vec(),
            k: k.data().to_vec(),
            att: att.clone(),
            fused: fused.clone(),
            n,
            d,
        };
        Ok((
            FusionOutputs {
                att: Tensor::from_vec(&[n, 4], att)?,
                fused: Tensor::from_vec(&[n, 4, d], fused)?,
                logits: Tensor::from_vec(&[n, 4], logits)?,
            },
            cache,
        ))
    }

    /// From `dL/dlogits` (`N x 4`) returns `(dL/dQ, dL/dK)`; head gradients
    /// accumulate in place.
    pub fn backward(&mut self, cache: &FusionCache<F>, dlogits: &Tensor<F>) -> (Tensor<F>, Tensor<F>) {
        let (n, d) = (cache.n, cache.d);
        let scale = F::one() / F::from_usize(d).unwrap().sqrt();
        let mut dq = vec![F::zero(); n * 4 * d];
        let mut dk = vec![F::zero(); n * d];
        for s in 0..n {
            let mut datt = [F::zero(); 4];
            for i in 0..4 {
                let dz = dlogits.data()[s * 4 + i];
                let row = (s * 4 + i) * d;
                let h = &mut self.heads[i];
                {
                    let gw = h.weight.grad_mut();
                    for j in 0..d {
                        gw[j] += dz * cache.fused[row + j];
                    }
                }
                h.bias.grad_mut()[0] += dz;
                let a = cache.att[s * 4 + i];
                for j in 0..d {
                    let dfused = dz * h.weight.data()[j];
                    datt[i] += dfused * cache.q[row + j];
                    dq[row + j] += a * dfused;
                }
            }
            let dlogit = softmax_backward(&cache.att[s * 4..s * 4 + 4], &datt);
            for i in 0..4 {
                let row = (s * 4 + i) * d;
                let g = dlogit[i] * scale;
                for j in 0..d {
                    dq[row + j] += g * cache.k[s * d + j];
                    dk[s * d + j] += g * cache.q[row + j];
                }
            }
        }
        (
            Tensor::from_vec(&[n, 4, d], dq).expect("dq"),
            Tensor::from_vec(&[n, d], dk).expect("dk"),
        )
    }
}

impl<F: Real> Module<F> for AvHeads<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        for (i, h) in self.heads.iter().enumerate() {
            h.parameters(&join(prefix, &format!("head{i}")), out);
        }
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        for (i, h) in self.heads.iter_mut().enumerate() {
            h.parameters_mut(&join(prefix, &format!("head{i}")), out);
        }
    }
}

/// Single-sample fusion: `q` is `4 x E`, `k` is `E`. Returns the fused rows
/// and the four audio-visual probabilities.
pub fn fuse_and_classify<F: Real>(q: &[F], k: &[F], heads: &AvHeads<F>) -> Result<(Vec<F>, [F; 4])> {
    let d = k.len();
    let qt = Tensor::from_vec(&[1, 4, d], q.to_vec())
        .map_err(|_| Error::shape("fuse_and_classify", format!("Q 4 x {d}"), format!("Q {} values", q.len())))?;
    let (out, _) = heads.forward(&qt, &Tensor::from_vec(&[1, d], k.to_vec())?)?;
    let z = out.logits.data();
    Ok((
        out.fused.into_data(),
        [sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2]), sigmoid(z[3])],
    ))
}
