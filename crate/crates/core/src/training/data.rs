use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{block_align, AudioClip, LogMelExtractor, N_MELS};
use crate::error::{Error, Result};
use crate::evalkit::EventAnnotation;
use crate::numcore::{Checkpoint, Real, Tensor};
use crate::synthgen::{block_labels, generate_scene, FrameLabels, Manifest, SceneSpec, VisualStream};

/// One aligned block with its targets; audio is raw log-mel, `T x 64`.
#[derive(Clone, Debug)]
pub struct Sample {
    pub start_time: f64,
    pub audio: Vec<f32>,
    pub visual: Vec<f32>,
    pub labels: FrameLabels,
}

impl Sample {
    /// Every log-mel value sits at the floor: the block carries no signal.
    pub fn is_digital_silence(&self) -> bool {
        let floor = (crate::dsp::MEL_FLOOR.ln() + 1e-3) as f32;
        self.audio.iter().all(|&v| v <= floor)
    }
}

#[derive(Clone, Debug)]
pub struct SceneData {
    pub id: usize,
    pub duration: f64,
    pub events: Vec<EventAnnotation>,
    pub samples: Vec<Sample>,
}

/// Pairs audio and frames into blocks and attaches majority-coverage labels.
pub fn prepare_scene(
    id: usize,
    clip: &AudioClip,
    frames: &VisualStream,
    events: &[EventAnnotation],
    extractor: &LogMelExtractor,
) -> Result<SceneData> {
    let blocks = extractor.blocks(clip)?;
    let duration = clip.duration();
    let labels = block_labels(events, duration);
    let samples = block_align(&blocks, frames)
        .into_iter()
        .map(|b| {
            let idx = (b.start_time() / crate::dsp::BLOCK_HOP_SECONDS).round() as usize;
            let labels = labels.get(idx).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("scene {id}: no label for block at {}", b.start_time()))
            })?;
            Ok(Sample {
                start_time: b.start_time(),
                audio: b.audio.values,
                visual: b.visual.frames,
                labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        warn!("scene {id}: no aligned blocks");
    }
    Ok(SceneData {
        id,
        duration,
        events: events.to_vec(),
        samples,
    })
}

pub fn load_scenes(manifest: &Manifest) -> Result<Vec<SceneData>> {
    let extractor = LogMelExtractor::new();
    (0..manifest.len())
        .map(|i| {
            let (clip, frames, events) = manifest.load_scene(i)?;
            prepare_scene(i, &clip, &frames, &events, &extractor)
        })
        .collect()
}

/// Features for in-memory generated scenes, ids in order.
pub fn synth_scenes(specs: &[SceneSpec]) -> Result<Vec<SceneData>> {
    let extractor = LogMelExtractor::new();
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let scene = generate_scene(spec)?;
            prepare_scene(i, &scene.audio, &scene.visual, &scene.events, &extractor)
        })
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<Vec<SceneData>> {
    load_scenes(&Manifest::load(path)?)
}

/// Per-mel-bank standardization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl FeatureNorm {
    pub fn identity() -> Self {
        FeatureNorm {
            mean: vec![0.0; N_MELS],
            std: vec![1.0; N_MELS],
        }
    }

    pub fn fit<'a>(samples: impl Iterator<Item = &'a Sample>) -> Self {
        let mut sum = vec![0.0f64; N_MELS];
        let mut sq = vec![0.0f64; N_MELS];
        let mut count = 0usize;
        for s in samples {
            for row in s.audio.chunks(N_MELS) {
                for (m, &v) in row.iter().enumerate() {
                    sum[m] += v as f64;
                    sq[m] += (v as f64).powi(2);
                }
                count += 1;
            }
        }
        if count == 0 {
            return Self::identity();
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q / c - m * m).max(0.0).sqrt().max(1e-3)) as f32)
            .collect();
        FeatureNorm {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        }
    }

    pub fn apply(&self, audio: &[f32], out: &mut Vec<f32>) {
        for row in audio.chunks(N_MELS) {
            out.extend(row.iter().enumerate().map(|(m, &v)| (v - self.mean[m]) / self.std[m]));
        }
    }

    pub fn store(&self, ck: &mut Checkpoint) -> Result<()> {
        ck.push("norm/mean", &[N_MELS], self.mean.clone())?;
        ck.push("norm/std", &[N_MELS], self.std.clone())
    }

    pub fn restore(ck: &Checkpoint) -> Result<Self> {
        Ok(FeatureNorm {
            mean: ck.require("norm/mean")?.values.clone(),
            std: ck.require("norm/std")?.values.clone(),
        })
    }
}

/// Network-ready tensors for a list of samples.
pub fn batch_tensors<F: Real>(
    samples: &[&Sample],
    norm: &FeatureNorm,
    audio_shape: (usize, usize),
    visual_shape: (usize, usize),
) -> Result<(Tensor<F>, Tensor<F>)> {
    let n = samples.len();
    let mut audio = Vec::with_capacity(n * audio_shape.0 * audio_shape.1);
    let mut visual = Vec::with_capacity(n * visual_shape.0 * visual_shape.1 * visual_shape.1);
    for s in samples {
        norm.apply(&s.audio, &mut audio);
        visual.extend_from_slice(&s.visual);
    }
    let a: Vec<F> = audio.into_iter().map(|v| F::lit(v as f64)).collect();
    let v: Vec<F> = visual.into_iter().map(|v| F::lit(v as f64)).collect();
    Ok((
        Tensor::from_vec(&[n, 1, audio_shape.0, audio_shape.1], a)?,
        Tensor::from_vec(&[n, visual_shape.0, visual_shape.1, visual_shape.1], v)?,
    ))
}

/// Scene indices for training, validation and test.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded scene-level split. Fractions round down, and training always keeps
/// at least one scene.
pub fn split_scenes(n: usize, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Splits> {
    if !(0.0..1.0).contains(&val_fraction) || !(0.0..1.0).contains(&test_fraction) || val_fraction + test_fraction >= 1.0 {
        return Err(Error::Config(format!(
            "val_fraction {val_fraction} and test_fraction {test_fraction} must be in [0, 1) and sum below 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5917_0000));
    let n_test = ((n as f64 * test_fraction).floor() as usize).min(n.saturating_sub(1));
    let n_val = ((n as f64 * val_fraction).floor() as usize).min(n.saturating_sub(1 + n_test));
    let test = order[..n_test].to_vec();
    let val = order[n_test..n_test + n_val].to_vec();
    let train = order[n_test + n_val..].to_vec();
    Ok(Splits { train, val, test })
}
