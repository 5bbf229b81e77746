use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::gru::GruCache;
use crate::numcore::{join, Dense, Gru, Mode, Module, Real, Tensor};

use super::glu::{GluBlock, GluCache};
use super::ModelConfig;

/// One event subbranch: GRU over the block sequence, linear embedding, logit.
#[derive(Clone, Debug)]
pub struct Subbranch<F: Real = f32> {
    pub gru: Gru<F>,
    pub embed: Dense<F>,
    pub head: Dense<F>,
}

/// Shared GLU trunk feeding four event subbranches (silence, speech,
/// singing, others).
#[derive(Clone, Debug)]
pub struct AudioBranch<F: Real = f32> {
    pub blocks: Vec<GluBlock<F>>,
    pub subbranches: Vec<Subbranch<F>>,
    frames: usize,
    bins: usize,
}

struct SubCache<F: Real> {
    gru: GruCache<F>,
    state: Tensor<F>,
    embedding: Tensor<F>,
}

pub struct AudioCache<F: Real> {
    pub(crate) blocks: Vec<GluCache<F>>,
    subs: Vec<SubCache<F>>,
    map_shape: [usize; 4],
}

/// Batched audio outputs.
pub struct AudioOutputs<F: Real> {
    /// `N x 4 x E`.
    pub q: Tensor<F>,
    /// `N x 4`.
    pub logits: Tensor<F>,
}

impl<F: Real> AudioBranch<F> {
    pub fn new<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut c_in = 1;
        let mut blocks = Vec::new();
        for &c in &cfg.audio_channels {
            blocks.push(GluBlock::new(c_in, c, cfg.kernel, cfg.dropout, rng));
            c_in = c;
        }
        let (_, f) = cfg.audio_map();
        let step = c_in * f;
        let subbranches = (0..4)
            .map(|_| Subbranch {
                gru: Gru::new(step, cfg.gru_hidden, rng),
                embed: Dense::new(cfg.gru_hidden, cfg.embed_dim, rng),
                head: Dense::new(cfg.embed_dim, 1, rng),
            })
            .collect();
        AudioBranch {
            blocks,
            subbranches,
            frames: cfg.audio_frames,
            bins: cfg.audio_bins,
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.subbranches[0].embed.outputs()
    }

    /// `x` is `N x 1 x frames x bins`.
    pub fn forward(
        &self,
        x: &Tensor<F>,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(AudioOutputs<F>, AudioCache<F>)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != 1 || s[2] != self.frames || s[3] != self.bins {
            return Err(Error::shape(
                "audio_forward",
                format!("N x 1 x {} x {}", self.frames, self.bins),
                format!("{s:?}"),
            ));
        }
        let n = s[0];
        let mut h = x.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&h, mode, rng.as_deref_mut())?;
            blocks.push(c);
            h = y;
        }
        let hs = h.shape();
        let (c, t, f) = (hs[1], hs[2], hs[3]);
        // time-major sequence of (channel, frequency) vectors
        let seq: Vec<Tensor<F>> = (0..t)
            .map(|ti| {
                let mut v = Vec::with_capacity(n * c * f);
                for i in 0..n {
                    for ch in 0..c {
                        let base = ((i * c + ch) * t + ti) * f;
                        v.extend_from_slice(&h.data()[base..base + f]);
                    }
                }
                Tensor::from_vec(&[n, c * f], v).expect("sequence step")
            })
            .collect();
        let e = self.embed_dim();
        let mut q = vec![F::zero(); n * 4 * e];
        let mut logits = vec![F::zero(); n * 4];
        let mut subs = Vec::with_capacity(4);
        for (k, sb) in self.subbranches.iter().enumerate() {
            let (state, gru) = sb.gru.forward(&seq)?;
            let embedding = sb.embed.forward(&state)?;
            let z = sb.head.forward(&embedding)?;
            for i in 0..n {
                q[(i * 4 + k) * e..(i * 4 + k + 1) * e].copy_from_slice(&embedding.data()[i * e..(i + 1) * e]);
                logits[i * 4 + k] = z.data()[i];
            }
            subs.push(SubCache { gru, state, embedding });
        }
        Ok((
            AudioOutputs {
                q: Tensor::from_vec(&[n, 4, e], q)?,
                logits: Tensor::from_vec(&[n, 4], logits)?,
            },
            AudioCache {
                blocks,
                subs,
                map_shape: [n, c, t, f],
            },
        ))
    }

    /// `dq` is `N x 4 x E` (may be absent), `dlogits` is `N x 4`.
    pub fn backward(&mut self, cache: &AudioCache<F>, dq: Option<&Tensor<F>>, dlogits: &Tensor<F>) {
        let [n, c, t, f] = cache.map_shape;
        let e = self.embed_dim();
        let mut dmap = vec![F::zero(); n * c * t * f];
        for (k, (sb, sc)) in self.subbranches.iter_mut().zip(&cache.subs).enumerate() {
            let dz: Vec<F> = (0..n).map(|i| dlogits.data()[i * 4 + k]).collect();
            let dz = Tensor::from_vec(&[n, 1], dz).expect("dz");
            let mut de = sb.head.backward(&sc.embedding, &dz);
            if let Some(dq) = dq {
                let d = de.data_mut();
                for i in 0..n {
                    for j in 0..e {
                        d[i * e + j] += dq.data()[(i * 4 + k) * e + j];
                    }
                }
            }
            let dh = sb.embed.backward(&sc.state, &de);
            let dxs = sb.gru.backward(&sc.gru, &dh);
            for (ti, dx) in dxs.iter().enumerate() {
                for i in 0..n {
                    for ch in 0..c {
                        let base = ((i * c + ch) * t + ti) * f;
                        let src = &dx.data()[(i * c + ch) * f..(i * c + ch + 1) * f];
                        for (a, &b) in dmap[base..base + f].iter_mut().zip(src) {
                            *a += b;
                        }
                    }
                }
            }
        }
        let mut d = Tensor::from_vec(&[n, c, t, f], dmap).expect("trunk grad");
        for (i, (b, bc)) in self.blocks.iter_mut().zip(&cache.blocks).enumerate().rev() {
            match b.backward(bc, &d, i > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }

    pub fn update_running(&mut self, cache: &AudioCache<F>) {
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            b.update_running(c);
        }
    }
}

impl<F: Real> Module<F> for AudioBranch<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.parameters(&join(prefix, &format!("block{i}")), out);
        }
        for (i, s) in self.subbranches.iter().enumerate() {
            let p = join(prefix, &format!("sub{i}"));
            s.gru.parameters(&join(&p, "gru"), out);
            s.embed.parameters(&join(&p, "embed"), out);
            s.head.parameters(&join(&p, "head"), out);
        }
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.parameters_mut(&join(prefix, &format!("block{i}")), out);
        }
        for (i, s) in self.subbranches.iter_mut().enumerate() {
            let p = join(prefix, &format!("sub{i}"));
            s.gru.parameters_mut(&join(&p, "gru"), out);
            s.embed.parameters_mut(&join(&p, "embed"), out);
            s.head.parameters_mut(&join(&p, "head"), out);
        }
    }

    fn buffers<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.buffers(&join(prefix, &format!("block{i}")), out);
        }
    }

    fn buffers_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.buffers_mut(&join(prefix, &format!("block{i}")), out);
        }
    }
}
