use std::time::Instant;

use avvad::model::{AvvadNet, ModelConfig, Variant};
use avvad::numcore::gradcheck::GradCheckConfig;
use avvad::numcore::{grad_check, Tensor};
use avvad::synthgen::FrameLabels;
use avvad::training::{LossWeights, Objective};
use avvad::EventClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_objective(seed: u64, weights: LossWeights) -> Objective<f64> {
    let cfg = ModelConfig::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3;
    let audio: Vec<f64> = (0..n * cfg.audio_frames * cfg.audio_bins).map(|_| rng.random_range(-2.0..2.0)).collect();
    let visual: Vec<f64> = (0..n * cfg.visual_frames * cfg.visual_size * cfg.visual_size)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let targets = (0..n)
        .map(|i| FrameLabels::from_class(EventClass::TARGETS[(i + seed as usize) % 4], 0.5 * i as f64))
        .collect();
    Objective {
        net: AvvadNet::new(&cfg, seed).unwrap(),
        audio: Tensor::from_vec(&[n, 1, cfg.audio_frames, cfg.audio_bins], audio).unwrap(),
        visual: Tensor::from_vec(&[n, cfg.visual_frames, cfg.visual_size, cfg.visual_size], visual).unwrap(),
        targets,
        weights,
        variant: Variant::Full,
    }
}

#[test]
fn full_objective_matches_finite_differences() {
    let t = Instant::now();
    for seed in 0..3 {
        let mut obj = tiny_objective(seed, LossWeights::default());
        let cfg = GradCheckConfig {
            seed,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut obj, 1e-4, &cfg).unwrap();
        let worst = report.worst().unwrap();
        println!(
            "seed {seed}: {} checked, {} excluded, worst {} [{}] rel {:.2e} (a {:.3e} n {:.3e})",
            report.checked.len(),
            report.excluded.len(),
            worst.name,
            worst.index,
            worst.rel_error,
            worst.analytic,
            worst.numeric
        );
        assert!(report.passed());
    }
    println!("{:?}", t.elapsed());
}

