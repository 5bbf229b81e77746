use std::time::Instant;

use avvad::model::{ModelConfig, Variant};
use avvad::synthgen::SceneSpec;
use avvad::training::*;

fn scenes(n: u64, base: u64) -> Vec<SceneData> {
    let specs: Vec<_> = (0..n).map(|i| SceneSpec::random(base + i, 10.0)).collect();
    synth_scenes(&specs).unwrap()
}

#[test]
fn overfits_one_scene() {
    let data = scenes(1, 500);
    let mut model = ModelConfig::default();
    model.dropout = 0.0;
    let cfg = TrainConfig {
        epochs: 1000,
        max_steps: Some(500),
        model,
        ..Default::default()
    };
    let t = Instant::now();
    let out = train(&data, &cfg).unwrap();
    let tail: f64 = out.losses.iter().rev().take(3).map(|l| l.total).sum::<f64>() / 3.0;
    let report = evaluate(&out.net, &out.norm, &data, Variant::Full).unwrap();
    eprintln!("steps {} loss {tail:.5} F {:.2} in {:?}", out.steps, report.f_score(), t.elapsed());
    assert!(out.steps <= 500);
    assert!(tail < 0.01, "loss {tail}");
    assert!(report.f_score() >= 99.0, "{report}");
}

fn short(seed: u64, steps: usize) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 3,
        max_steps: Some(steps),
        ..Default::default()
    }
}

#[test]
fn same_seed_same_losses_and_checkpoint() {
    let data = scenes(4, 60);
    let a = train(&data, &short(9, 8)).unwrap();
    let b = train(&data, &short(9, 8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (la, lb) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    write_loss_log(&la, &a.losses).unwrap();
    write_loss_log(&lb, &b.losses).unwrap();
    assert_eq!(std::fs::read(&la).unwrap(), std::fs::read(&lb).unwrap());
    let (ca, cb) = (dir.path().join("a.ck"), dir.path().join("b.ck"));
    a.checkpoint.save(&ca).unwrap();
    b.checkpoint.save(&cb).unwrap();
    assert_eq!(std::fs::read(&ca).unwrap(), std::fs::read(&cb).unwrap());

    let c = train(&data, &short(10, 8)).unwrap();
    assert_ne!(a.losses[1].total, c.losses[1].total);
}

#[test]
fn checkpoint_round_trip_reproduces_predictions() {
    let data = scenes(2, 80);
    let out = train(&data, &short(3, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ck");
    save_model(&path, &out.net, &out.norm, Variant::Full).unwrap();
    let (net, norm, variant) = load_model(&path).unwrap();
    assert_eq!(variant, Variant::Full);
    assert_eq!(norm, out.norm);
    let p0 = predict_samples(&out.net, &out.norm, &data[0].samples, Variant::Full).unwrap();
    let p1 = predict_samples(&net, &norm, &data[0].samples, Variant::Full).unwrap();
    assert_eq!(p0, p1);
}

#[test]
fn truncated_checkpoint_is_an_error() {
    let data = scenes(1, 90);
    let out = train(&data, &short(0, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ck");
    out.checkpoint.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn audio_losses_fall_without_visual_signal() {
    let mut data = scenes(4, 120);
    for s in &mut data {
        for b in &mut s.samples {
            b.visual.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let mut weights = LossWeights::default();
    weights.lambda[4] = 0.0;
    let cfg = TrainConfig {
        epochs: 20,
        max_steps: Some(50),
        weights,
        val_fraction: 0.0,
        test_fraction: 0.0,
        ..Default::default()
    };
    let out = train(&data, &cfg).unwrap();
    assert_eq!(out.steps, 50);
    let audio = |l: &[LossReport]| l.iter().map(|r| r.terms[..4].iter().sum::<f64>()).sum::<f64>() / l.len() as f64;
    let (first, last) = (audio(&out.losses[..8]), audio(&out.losses[42..]));
    assert!(last < 0.8 * first, "{first} -> {last}");
}

#[test]
fn rejects_bad_configs() {
    let data = scenes(1, 130);
    for cfg in [
        TrainConfig { batch_size: 0, ..short(0, 1) },
        TrainConfig { lr: -1.0, ..short(0, 1) },
        TrainConfig { weights: LossWeights { lambda: [-1.0; 9] }, ..short(0, 1) },
    ] {
        assert!(train(&data, &cfg).is_err());
    }
}

#[test]
fn export_writes_one_row_per_block() {
    let data = scenes(2, 140);
    let out = train(&data, &short(1, 2)).unwrap();
    let mut buf = Vec::new();
    let rows = export_embeddings(&out.net, &out.norm, &data, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(rows, 38);
    assert_eq!(text.lines().count(), 39);
    let width = text.lines().next().unwrap().split('\t').count();
    assert!(text.lines().all(|l| l.split('\t').count() == width));
}

#[test]
fn digital_silence_decodes_as_one_silence_event() {
    use avvad::synthgen::Segment;
    use avvad::EventClass;
    let spec = SceneSpec {
        seed: 1,
        duration: 6.0,
        segments: vec![Segment { class: EventClass::Silence, start: 0.0, end: 6.0 }],
        snr_db: 0.0,
        distractor_voice: false,
        background: false,
    };
    let data = synth_scenes(&[spec]).unwrap();
    assert!(data[0].samples.iter().all(Sample::is_digital_silence));
    let net = avvad::model::AvvadNet::<f32>::new(&ModelConfig::default(), 0).unwrap();
    for v in [Variant::Full, Variant::AudioOnly] {
        let ev = infer_scene(&net, &FeatureNorm::identity(), &data[0], v).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].onset, ev[0].offset, ev[0].label), (0.0, 6.0, EventClass::Silence));
    }
}
