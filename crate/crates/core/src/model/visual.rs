use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::{join, Dense, Mode, Module, Real, Tensor};

use super::glu::{GluBlock, GluCache};
use super::ModelConfig;

/// Convolution-only stack over frames stacked as channels, then the
/// vocalization embedding and its logit.
#[derive(Clone, Debug)]
pub struct VisualBranch<F: Real = f32> {
    pub blocks: Vec<GluBlock<F>>,
    pub embed: Dense<F>,
    pub head: Dense<F>,
    frames: usize,
    size: usize,
}

pub struct VisualCache<F: Real> {
    pub(crate) blocks: Vec<GluCache<F>>,
    flat: Tensor<F>,
    k: Tensor<F>,
    map_shape: Vec<usize>,
}

pub struct VisualOutputs<F: Real> {
    /// `N x E`.
    pub k: Tensor<F>,
    /// `N x 1`.
    pub logit: Tensor<F>,
}

impl<F: Real> VisualBranch<F> {
    pub fn new<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut c_in = cfg.visual_frames;
        let mut blocks = Vec::new();
        for &c in &cfg.visual_channels {
            blocks.push(GluBlock::new(c_in, c, cfg.kernel, cfg.dropout, rng));
            c_in = c;
        }
        let side = cfg.visual_map();
        VisualBranch {
            blocks,
            embed: Dense::new(c_in * side * side, cfg.embed_dim, rng),
            head: Dense::new(cfg.embed_dim, 1, rng),
            frames: cfg.visual_frames,
            size: cfg.visual_size,
        }
    }

    /// `x` is `N x frames x size x size`.
    pub fn forward(
        &self,
        x: &Tensor<F>,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(VisualOutputs<F>, VisualCache<F>)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.frames || s[2] != self.size || s[3] != self.size {
            return Err(Error::shape(
                "visual_forward",
                format!("N x {} x {} x {}", self.frames, self.size, self.size),
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
        let map_shape = h.shape().to_vec();
        let flat = h.reshape(&[n, map_shape[1..].iter().product()])?;
        let k = self.embed.forward(&flat)?;
        let logit = self.head.forward(&k)?;
        Ok((
            VisualOutputs { k: k.clone(), logit },
            VisualCache {
                blocks,
                flat,
                k,
                map_shape,
            },
        ))
    }

    pub fn backward(&mut self, cache: &VisualCache<F>, dk: Option<&Tensor<F>>, dlogit: &Tensor<F>) {
        let mut de = self.head.backward(&cache.k, dlogit);
        if let Some(dk) = dk {
            de.data_mut().iter_mut().zip(dk.data()).for_each(|(a, &b)| *a += b);
        }
        let dflat = self.embed.backward(&cache.flat, &de);
        let mut d = dflat.reshape(&cache.map_shape).expect("visual map grad");
        for (i, (b, bc)) in self.blocks.iter_mut().zip(&cache.blocks).enumerate().rev() {
            match b.backward(bc, &d, i > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }

    pub fn update_running(&mut self, cache: &VisualCache<F>) {
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            b.update_running(c);
        }
    }
}

impl<F: Real> Module<F> for VisualBranch<F> {
    fn parameters<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.parameters(&join(prefix, &format!("block{i}")), out);
        }
        self.embed.parameters(&join(prefix, "embed"), out);
        self.head.parameters(&join(prefix, "head"), out);
    }

    fn parameters_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.parameters_mut(&join(prefix, &format!("block{i}")), out);
        }
        self.embed.parameters_mut(&join(prefix, "embed"), out);
        self.head.parameters_mut(&join(prefix, "head"), out);
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
