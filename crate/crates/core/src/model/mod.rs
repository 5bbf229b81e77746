//! The audio CRNN branch, the visual convolution branch, and the assembled
//! audio-visual network.

mod audio;
mod glu;
mod visual;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use audio::{AudioBranch, AudioCache, AudioOutputs, Subbranch};
pub use glu::{glu_block_forward, GluBlock, GluCache};
pub use visual::{VisualBranch, VisualCache, VisualOutputs};

use crate::error::{Error, Result};
use crate::fusion::{AvHeads, FusionCache};
use crate::numcore::{sigmoid, Mode, Module, Real, Tensor};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub audio_frames: usize,
    pub audio_bins: usize,
    pub audio_channels: Vec<usize>,
    pub gru_hidden: usize,
    pub embed_dim: usize,
    pub visual_frames: usize,
    pub visual_size: usize,
    pub visual_channels: Vec<usize>,
    pub kernel: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            audio_frames: 44,
            audio_bins: 64,
            audio_channels: vec![16, 32, 64, 64],
            gru_hidden: 64,
            embed_dim: 128,
            visual_frames: 8,
            visual_size: 32,
            visual_channels: vec![8, 16, 32, 32],
            kernel: 3,
            dropout: 0.2,
        }
    }
}

impl ModelConfig {
    /// Two blocks per branch, 4-unit GRU, small inputs.
    pub fn tiny() -> Self {
        ModelConfig {
            audio_frames: 8,
            audio_bins: 8,
            audio_channels: vec![3, 4],
            gru_hidden: 4,
            embed_dim: 6,
            visual_frames: 2,
            visual_size: 8,
            visual_channels: vec![3, 4],
            kernel: 3,
            dropout: 0.0,
        }
    }

    /// Time steps and frequency cells left after the audio trunk.
    pub fn audio_map(&self) -> (usize, usize) {
        let pools = self.audio_channels.len() as u32;
        (self.audio_frames >> pools, self.audio_bins >> pools)
    }

    pub fn visual_map(&self) -> usize {
        self.visual_size >> self.visual_channels.len() as u32
    }

    pub fn validate(&self) -> Result<()> {
        let (t, f) = self.audio_map();
        if self.audio_channels.is_empty() || self.visual_channels.is_empty() || t == 0 || f == 0 || self.visual_map() == 0 {
            return Err(Error::InvalidArgument(format!("model config leaves an empty feature map: {self:?}")));
        }
        if self.kernel % 2 == 0 || self.gru_hidden == 0 || self.embed_dim == 0 || !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("invalid model config: {self:?}")));
        }
        Ok(())
    }

    /// Flat numeric encoding for checkpoints.
    pub fn encode(&self) -> Vec<f32> {
        let mut v = vec![
            self.audio_frames as f32,
            self.audio_bins as f32,
            self.gru_hidden as f32,
            self.embed_dim as f32,
            self.visual_frames as f32,
            self.visual_size as f32,
            self.kernel as f32,
            self.dropout as f32,
            self.audio_channels.len() as f32,
        ];
        v.extend(self.audio_channels.iter().map(|&c| c as f32));
        v.push(self.visual_channels.len() as f32);
        v.extend(self.visual_channels.iter().map(|&c| c as f32));
        v
    }

    pub fn decode(v: &[f32]) -> Result<Self> {
        let bad = || Error::InvalidArgument("malformed model config record".into());
        let get = |i: usize| v.get(i).copied().ok_or_else(bad);
        let na = get(8)? as usize;
        let audio_channels = (0..na).map(|i| get(9 + i).map(|c| c as usize)).collect::<Result<_>>()?;
        let nv = get(9 + na)? as usize;
        let visual_channels = (0..nv).map(|i| get(10 + na + i).map(|c| c as usize)).collect::<Result<_>>()?;
        let cfg = ModelConfig {
            audio_frames: get(0)? as usize,
            audio_bins: get(1)? as usize,
            gru_hidden: get(2)? as usize,
            embed_dim: get(3)? as usize,
            visual_frames: get(4)? as usize,
            visual_size: get(5)? as usize,
            kernel: get(6)? as usize,
            dropout: get(7)? as f64,
            audio_channels,
            visual_channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which branches take part in training and decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    AudioOnly,
    VisualOnly,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::AudioOnly, Variant::VisualOnly, Variant::Full];

    pub fn uses_audio(self) -> bool {
        self != Variant::VisualOnly
    }

    pub fn uses_visual(self) -> bool {
        self != Variant::AudioOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::AudioOnly => "audio_only",
            Variant::VisualOnly => "visual_only",
            Variant::Full => "full",
        }
    }

    pub fn code(self) -> f32 {
        match self {
            Variant::AudioOnly => 0.0,
            Variant::VisualOnly => 1.0,
            Variant::Full => 2.0,
        }
    }

    pub fn from_code(c: f32) -> Result<Self> {
        match c as i32 {
            0 => Ok(Variant::AudioOnly),
            1 => Ok(Variant::VisualOnly),
            2 => Ok(Variant::Full),
            _ => Err(Error::InvalidArgument(format!("unknown variant code {c}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio_only" => Ok(Variant::AudioOnly),
            "visual_only" => Ok(Variant::VisualOnly),
            "full" => Ok(Variant::Full),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variant {s:?} (expected audio_only, visual_only or full)"
            ))),
        }
    }
}

/// One sample's branch outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchOutputs<F = f32> {
    /// `4 x E`, rows q1..q4.
    pub q: Vec<F>,
    pub p_audio: [F; 4],
    pub k: Vec<F>,
    pub p_visual: F,
}

/// Batched forward results; branches skipped by the variant are `None`.
pub struct NetOutputs<F: Real> {
    pub n: usize,
    pub audio: Option<AudioOutputs<F>>,
    pub visual: Option<VisualOutputs<F>>,
    pub fusion: Option<crate::fusion::FusionOutputs<F>>,
}

fn probs4<F: Real>(t: &Tensor<F>, i: usize) -> [F; 4] {
    let d = &t.data()[i * 4..i * 4 + 4];
    [sigmoid(d[0]), sigmoid(d[1]), sigmoid(d[2]), sigmoid(d[3])]
}

impl<F: Real> NetOutputs<F> {
    pub fn p_audio(&self, i: usize) -> Option<[F; 4]> {
        self.audio.as_ref().map(|a| probs4(&a.logits, i))
    }

    pub fn p_visual(&self, i: usize) -> Option<F> {
        self.visual.as_ref().map(|v| sigmoid(v.logit.data()[i]))
    }

    pub fn p_av(&self, i: usize) -> Option<[F; 4]> {
        self.fusion.as_ref().map(|f| probs4(&f.logits, i))
    }

    pub fn branch(&self, i: usize) -> Option<BranchOutputs<F>> {
        let (a, v) = (self.audio.as_ref()?, self.visual.as_ref()?);
        let e = v.k.shape()[1];
        Some(BranchOutputs {
            q: a.q.data()[i * 4 * e..(i + 1) * 4 * e].to_vec(),
            p_audio: probs4(&a.logits, i),
            k: v.k.data()[i * e..(i + 1) * e].to_vec(),
            p_visual: sigmoid(v.logit.data()[i]),
        })
    }
}

pub struct NetCache<F: Real> {
    audio: Option<AudioCache<F>>,
    visual: Option<VisualCache<F>>,
    fusion: Option<FusionCache<F>>,
}

impl<F: Real> NetCache<F> {
    /// Every ReLU sign and pooling winner taken in the pass.
    pub fn fingerprint(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let blocks = self
            .audio
            .iter()
            .flat_map(|a| a.blocks.iter())
            .chain(self.visual.iter().flat_map(|v| v.blocks.iter()));
        for b in blocks {
            b.fingerprint(&mut out);
        }
        out
    }
}

/// Gradients of the loss with respect to every logit.
pub struct LogitGrads<F: Real> {
    /// `N x 4`.
    pub audio: Option<Tensor<F>>,
    /// `N x 1`.
    pub visual: Option<Tensor<F>>,
    /// `N x 4`.
    pub av: Option<Tensor<F>>,
}

/// Audio branch, visual branch and attention fusion heads.
#[derive(Clone, Debug)]
pub struct AvvadNet<F: Real = f32> {
    pub config: ModelConfig,
    pub audio: AudioBranch<F>,
    pub visual: VisualBranch<F>,
    pub heads: AvHeads<F>,
}

impl<F: Real> AvvadNet<F> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(AvvadNet {
            config: config.clone(),
            audio: AudioBranch::new(config, &mut rng),
            visual: VisualBranch::new(config, &mut rng),
            heads: AvHeads::new(config.embed_dim, &mut rng),
        })
    }

    /// `audio` is `N x 1 x T x F`, `visual` is `N x frames x S x S`. Dropout
    /// is active only in train mode with an `rng`.
    pub fn forward(
        &self,
        audio: &Tensor<F>,
        visual: &Tensor<F>,
        variant: Variant,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(NetOutputs<F>, NetCache<F>)> {
        let n = audio.shape().first().copied().unwrap_or(0);
        let (a_out, a_cache) = if variant.uses_audio() {
            let (o, c) = self.audio.forward(audio, mode, rng.as_deref_mut())?;
            (Some(o), Some(c))
        } else {
            (None, None)
        };
        let (v_out, v_cache) = if variant.uses_visual() {
            let (o, c) = self.visual.forward(visual, mode, rng.as_deref_mut())?;
            (Some(o), Some(c))
        } else {
            (None, None)
        };
        let (f_out, f_cache) = match (&a_out, &v_out) {
            (Some(a), Some(v)) => {
                let (o, c) = self.heads.forward(&a.q, &v.k)?;
                (Some(o), Some(c))
            }
            _ => (None, None),
        };
        Ok((
            NetOutputs {
                n,
                audio: a_out,
                visual: v_out,
                fusion: f_out,
            },
            NetCache {
                audio: a_cache,
                visual: v_cache,
                fusion: f_cache,
            },
        ))
    }

    /// Accumulates parameter gradients from logit gradients.
    pub fn backward(&mut self, cache: &NetCache<F>, grads: &LogitGrads<F>) {
        let (dq, dk) = match (&cache.fusion, &grads.av) {
            (Some(fc), Some(dav)) => {
                let (dq, dk) = self.heads.backward(fc, dav);
                (Some(dq), Some(dk))
            }
            _ => (None, None),
        };
        if let Some(ac) = &cache.audio {
            let n = dq.as_ref().map(|t| t.shape()[0]).unwrap_or_else(|| grads.audio.as_ref().map_or(0, |t| t.shape()[0]));
            let zeros = Tensor::zeros(&[n, 4]);
            self.audio.backward(ac, dq.as_ref(), grads.audio.as_ref().unwrap_or(&zeros));
        }
        if let Some(vc) = &cache.visual {
            let n = dk.as_ref().map(|t| t.shape()[0]).unwrap_or_else(|| grads.visual.as_ref().map_or(0, |t| t.shape()[0]));
            let zeros = Tensor::zeros(&[n, 1]);
            self.visual.backward(vc, dk.as_ref(), grads.visual.as_ref().unwrap_or(&zeros));
        }
    }

    pub fn update_running(&mut self, cache: &NetCache<F>) {
        if let Some(c) = &cache.audio {
            self.audio.update_running(c);
        }
        if let Some(c) = &cache.visual {
            self.visual.update_running(c);
        }
    }
}

impl<F: Real> Module<F> for AvvadNet<F> {
    fn parameters<'a>(&'a self, _prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        self.audio.parameters("audio", out);
        self.visual.parameters("visual", out);
        self.heads.parameters("av", out);
    }

    fn parameters_mut<'a>(&'a mut self, _prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        self.audio.parameters_mut("audio", out);
        self.visual.parameters_mut("visual", out);
        self.heads.parameters_mut("av", out);
    }

    fn buffers<'a>(&'a self, _prefix: &str, out: &mut Vec<(String, &'a Tensor<F>)>) {
        self.audio.buffers("audio", out);
        self.visual.buffers("visual", out);
    }

    fn buffers_mut<'a>(&'a mut self, _prefix: &str, out: &mut Vec<(String, &'a mut Tensor<F>)>) {
        self.audio.buffers_mut("audio", out);
        self.visual.buffers_mut("visual", out);
    }
}

/// Audio branch on one standardized `T x F` block: `(Q as 4 x E, p_audio)`.
pub fn audio_forward<F: Real>(block: &Tensor<F>, branch: &AudioBranch<F>, mode: Mode) -> Result<(Tensor<F>, [F; 4])> {
    let s = block.shape().to_vec();
    if s.len() != 2 {
        return Err(Error::shape("audio_forward", "T x F block", format!("{s:?}")));
    }
    let x = block.clone().reshape(&[1, 1, s[0], s[1]])?;
    let (out, _) = branch.forward(&x, mode, None)?;
    let e = branch.embed_dim();
    let p = probs4(&out.logits, 0);
    Ok((out.q.reshape(&[4, e])?, p))
}

/// Visual branch on one `frames x S x S` sequence: `(K, p_visual)`.
pub fn visual_forward<F: Real>(frames: &Tensor<F>, branch: &VisualBranch<F>, mode: Mode) -> Result<(Vec<F>, F)> {
    let s = frames.shape().to_vec();
    if s.len() != 3 {
        return Err(Error::shape("visual_forward", "frames x S x S", format!("{s:?}")));
    }
    let x = frames.clone().reshape(&[1, s[0], s[1], s[2]])?;
    let (out, _) = branch.forward(&x, mode, None)?;
    Ok((out.k.into_data(), sigmoid(out.logit.data()[0])))
}
