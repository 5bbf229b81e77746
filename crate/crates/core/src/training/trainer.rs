use std::fs;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evalkit::{event_metrics, frames_to_events, vocal_events, vocal_reference, EventAnnotation, MetricsReport, DEFAULT_COLLAR, VISUAL_THRESHOLD};
use crate::model::{AvvadNet, ModelConfig, Variant};
use crate::numcore::{AdamState, Checkpoint, Mode, Module, Tensor};

use super::data::{batch_tensors, split_scenes, FeatureNorm, Sample, SceneData, Splits};
use super::loss::{batch_loss, LossReport, LossWeights, Predictions, SWEEP_ROWS};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub model: ModelConfig,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 30,
            batch_size: 8,
            lr: 1e-3,
            weights: LossWeights::default(),
            val_fraction: 0.15,
            test_fraction: 0.15,
            max_steps: None,
            model: ModelConfig::default(),
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    /// Loss weights with the terms of unused branches zeroed.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.weights;
        if !self.variant.uses_visual() {
            w.lambda[4..].iter_mut().for_each(|l| *l = 0.0);
        }
        if !self.variant.uses_audio() {
            w.lambda[..4].iter_mut().for_each(|l| *l = 0.0);
            w.lambda[5..].iter_mut().for_each(|l| *l = 0.0);
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub net: AvvadNet<f32>,
    pub norm: FeatureNorm,
    pub checkpoint: Checkpoint,
    pub losses: Vec<LossReport>,
    /// Validation F-score after each epoch.
    pub validation: Vec<(usize, MetricsReport)>,
    pub best_epoch: usize,
    pub splits: Splits,
    pub steps: usize,
}

fn shapes(cfg: &ModelConfig) -> ((usize, usize), (usize, usize)) {
    ((cfg.audio_frames, cfg.audio_bins), (cfg.visual_frames, cfg.visual_size))
}

fn pick<'a>(scenes: &'a [SceneData], idx: &[usize]) -> Vec<&'a SceneData> {
    idx.iter().map(|&i| &scenes[i]).collect()
}

pub fn train(scenes: &[SceneData], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let splits = split_scenes(scenes.len(), cfg.val_fraction, cfg.test_fraction, cfg.seed)?;
    let train_scenes = pick(scenes, &splits.train);
    let val_scenes = if splits.val.is_empty() { train_scenes.clone() } else { pick(scenes, &splits.val) };
    let samples: Vec<&Sample> = train_scenes.iter().flat_map(|s| s.samples.iter()).collect();
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training blocks".into()));
    }
    let norm = FeatureNorm::fit(samples.iter().copied());
    let weights = cfg.effective_weights();
    let (ashape, vshape) = shapes(&cfg.model);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = AvvadNet::<f32>::new(&cfg.model, rng.random())?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut adam = AdamState::<f32>::new(cfg.lr);

    let mut losses = Vec::new();
    let mut validation = Vec::new();
    let mut best: Option<(f64, usize, Checkpoint)> = None;
    let mut steps = 0usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut stop = false;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| samples[i]).collect();
            let targets: Vec<_> = batch.iter().map(|s| s.labels).collect();
            let (a, v) = batch_tensors::<f32>(&batch, &norm, ashape, vshape)?;
            let (out, cache) = net.forward(&a, &v, cfg.variant, Mode::Train, Some(&mut dropout_rng))?;
            let (mut report, grads) = batch_loss(&out, &targets, &weights)?;
            if !report.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            report.epoch = epoch;
            report.batch = b;
            net.zero_grad();
            net.backward(&cache, &grads);
            {
                let mut params = Vec::new();
                net.parameters_mut("", &mut params);
                let mut refs: Vec<&mut Tensor<f32>> = params.into_iter().map(|(_, t)| t).collect();
                adam.step(&mut refs)?;
            }
            net.update_running(&cache);
            losses.push(report);
            steps += 1;
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        let report = evaluate(&net, &norm, val_scenes.iter().copied(), cfg.variant)?;
        let f = report.f_score();
        info!(
            "epoch {epoch}: last loss {:.4}, validation F {f:.2}%, ER {:.3}",
            losses.last().map_or(f64::NAN, |l: &LossReport| l.total),
            report.error_rate()
        );
        validation.push((epoch, report));
        if best.as_ref().is_none_or(|(bf, _, _)| f > *bf) {
            best = Some((f, epoch, to_checkpoint(&net, &norm, cfg.variant)?));
        }
        if stop {
            break 'epochs;
        }
    }
    let (best_epoch, checkpoint) = match best {
        Some((_, e, ck)) => (e, ck),
        None => (0, to_checkpoint(&net, &norm, cfg.variant)?),
    };
    let (net, norm, _) = from_checkpoint(&checkpoint)?;
    Ok(TrainOutcome {
        net,
        norm,
        checkpoint,
        losses,
        validation,
        best_epoch,
        splits,
        steps,
    })
}

pub fn to_checkpoint(net: &AvvadNet<f32>, norm: &FeatureNorm, variant: Variant) -> Result<Checkpoint> {
    let mut ck = Checkpoint::new();
    ck.push("meta/param_count", &[1], vec![net.parameter_count() as f32])?;
    let cfg = net.config.encode();
    ck.push("meta/model_config", &[cfg.len()], cfg)?;
    ck.push("meta/variant", &[1], vec![variant.code()])?;
    let mut tensors = Vec::new();
    net.parameters("", &mut tensors);
    net.buffers("", &mut tensors);
    for (name, t) in tensors {
        ck.push_tensor(name, t)?;
    }
    norm.store(&mut ck)?;
    Ok(ck)
}

pub fn from_checkpoint(ck: &Checkpoint) -> Result<(AvvadNet<f32>, FeatureNorm, Variant)> {
    let cfg = ModelConfig::decode(&ck.require("meta/model_config")?.values)?;
    let variant = Variant::from_code(ck.require("meta/variant")?.values[0])?;
    let mut net = AvvadNet::<f32>::new(&cfg, 0)?;
    let expected = ck.require("meta/param_count")?.values[0] as usize;
    if net.parameter_count() != expected {
        return Err(Error::InvalidArgument(format!(
            "checkpoint records {expected} parameters, configuration has {}",
            net.parameter_count()
        )));
    }
    let assign = |tensors: Vec<(String, &mut Tensor<f32>)>| -> Result<()> {
        for (name, t) in tensors {
            let e = ck.require(&name)?;
            if e.shape != t.shape() {
                return Err(Error::shape("checkpoint load", format!("{name} {:?}", t.shape()), format!("{:?}", e.shape)));
            }
            t.data_mut().copy_from_slice(&e.values);
        }
        Ok(())
    };
    let mut tensors = Vec::new();
    net.parameters_mut("", &mut tensors);
    assign(tensors)?;
    let mut tensors = Vec::new();
    net.buffers_mut("", &mut tensors);
    assign(tensors)?;
    Ok((net, FeatureNorm::restore(ck)?, variant))
}

pub fn save_model(path: &Path, net: &AvvadNet<f32>, norm: &FeatureNorm, variant: Variant) -> Result<()> {
    to_checkpoint(net, norm, variant)?.save(path)
}

pub fn load_model(path: &Path) -> Result<(AvvadNet<f32>, FeatureNorm, Variant)> {
    from_checkpoint(&Checkpoint::load(path)?)
}

/// Eval-mode predictions for every block of a scene, batched. Blocks of pure
/// digital silence are reported as silence by the audio and fused outputs.
pub fn predict_samples(net: &AvvadNet<f32>, norm: &FeatureNorm, samples: &[Sample], variant: Variant) -> Result<Vec<Predictions>> {
    let (ashape, vshape) = shapes(&net.config);
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (a, v) = batch_tensors::<f32>(&refs, norm, ashape, vshape)?;
        let (o, _) = net.forward(&a, &v, variant, Mode::Eval, None)?;
        for (i, s) in chunk.iter().enumerate() {
            let mut p = Predictions {
                audio: o.p_audio(i),
                visual: o.p_visual(i),
                av: o.p_av(i),
            };
            if s.is_digital_silence() {
                let silent = Some([1.0, 0.0, 0.0, 0.0]);
                p.audio = p.audio.and(silent);
                p.av = p.av.and(silent);
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Post-processed events from block predictions: audio-visual probabilities
/// for the full model, audio probabilities for the audio-only model,
/// thresholded vocalization for the visual-only model.
pub fn decode_events(preds: &[Predictions], variant: Variant, duration: f64) -> Vec<EventAnnotation> {
    match variant {
        Variant::Full => frames_to_events(&preds.iter().map(|p| p.av.unwrap_or([0.25; 4])).collect::<Vec<_>>(), Some(duration)),
        Variant::AudioOnly => {
            frames_to_events(&preds.iter().map(|p| p.audio.unwrap_or([0.25; 4])).collect::<Vec<_>>(), Some(duration))
        }
        Variant::VisualOnly => vocal_events(
            &preds.iter().map(|p| p.visual.unwrap_or(0.0)).collect::<Vec<_>>(),
            VISUAL_THRESHOLD,
            Some(duration),
        ),
    }
}

pub fn infer_scene(net: &AvvadNet<f32>, norm: &FeatureNorm, scene: &SceneData, variant: Variant) -> Result<Vec<EventAnnotation>> {
    let preds = predict_samples(net, norm, &scene.samples, variant)?;
    Ok(decode_events(&preds, variant, scene.duration))
}

/// Summed event metrics over scenes.
pub fn evaluate<'a>(
    net: &AvvadNet<f32>,
    norm: &FeatureNorm,
    scenes: impl IntoIterator<Item = &'a SceneData>,
    variant: Variant,
) -> Result<MetricsReport> {
    let mut total = MetricsReport::default();
    for scene in scenes {
        let detected = infer_scene(net, norm, scene, variant)?;
        let reference = match variant {
            Variant::VisualOnly => vocal_reference(&scene.events),
            _ => scene.events.clone(),
        };
        total.merge(&event_metrics(&reference, &detected, DEFAULT_COLLAR)?);
    }
    Ok(total)
}

/// Held-out scenes: the test split, else validation, else training.
pub fn held_out(splits: &Splits) -> &[usize] {
    if !splits.test.is_empty() {
        &splits.test
    } else if !splits.val.is_empty() {
        &splits.val
    } else {
        &splits.train
    }
}

#[derive(Clone, Debug)]
pub struct AblationResult {
    pub seed: u64,
    pub variant: Variant,
    pub report: MetricsReport,
}

/// Trains `variant` with `cfg` and scores it on the held-out scenes.
pub fn ablate(scenes: &[SceneData], cfg: &TrainConfig, variant: Variant) -> Result<AblationResult> {
    let cfg = TrainConfig { variant, ..cfg.clone() };
    let outcome = train(scenes, &cfg)?;
    let report = evaluate(&outcome.net, &outcome.norm, pick(scenes, held_out(&outcome.splits)), variant)?;
    info!("seed {} {variant}: F {:.2}%, ER {:.3}", cfg.seed, report.f_score(), report.error_rate());
    Ok(AblationResult {
        seed: cfg.seed,
        variant,
        report,
    })
}

/// Every variant for every seed.
pub fn ablation_table(scenes: &[SceneData], cfg: &TrainConfig, seeds: &[u64]) -> Result<Vec<AblationResult>> {
    let mut out = Vec::new();
    for &seed in seeds {
        for v in Variant::ALL {
            out.push(ablate(scenes, &TrainConfig { seed, ..cfg.clone() }, v)?);
        }
    }
    Ok(out)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn ablation_report(results: &[AblationResult]) -> String {
    let mut s = String::from("variant\tseed\tP\tR\tF\tER\n");
    for r in results {
        let c = &r.report.overall;
        s.push_str(&format!(
            "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\n",
            r.variant,
            r.seed,
            c.precision(),
            c.recall(),
            c.f_score(),
            c.error_rate()
        ));
    }
    for v in Variant::ALL {
        let mut f: Vec<f64> = results.iter().filter(|r| r.variant == v).map(|r| r.report.f_score()).collect();
        let mut er: Vec<f64> = results.iter().filter(|r| r.variant == v).map(|r| r.report.error_rate()).collect();
        if !f.is_empty() {
            s.push_str(&format!("{v}\tmedian\t\t\t{:.2}\t{:.4}\n", median(&mut f), median(&mut er)));
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub lambda: (f64, f64, f64),
    pub report: MetricsReport,
}

/// The six grouped loss-weight settings, in order, each trained from the same
/// seed and scored on the held-out scenes.
pub fn sweep(scenes: &[SceneData], cfg: &TrainConfig) -> Result<Vec<SweepRow>> {
    SWEEP_ROWS
        .iter()
        .map(|&(a, v, av)| {
            let c = TrainConfig {
                weights: LossWeights::grouped(a, v, av),
                variant: Variant::Full,
                ..cfg.clone()
            };
            let r = ablate(scenes, &c, Variant::Full)?;
            Ok(SweepRow {
                lambda: (a, v, av),
                report: r.report,
            })
        })
        .collect()
}

pub fn sweep_report(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda_a\tlambda_v\tlambda_av\tP\tR\tF\tER\n");
    for r in rows {
        let c = &r.report.overall;
        s.push_str(&format!(
            "{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\n",
            r.lambda.0,
            r.lambda.1,
            r.lambda.2,
            c.precision(),
            c.recall(),
            c.f_score(),
            c.error_rate()
        ));
    }
    s
}

pub fn write_loss_log(path: &Path, losses: &[LossReport]) -> Result<()> {
    let mut s = LossReport::tsv_header();
    for l in losses {
        s.push_str(&l.tsv_row());
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
