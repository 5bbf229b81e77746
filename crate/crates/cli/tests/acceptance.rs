//! End-to-end acceptance checks. One PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use avvad::dsp::{stft_logmel, AudioClip};
use avvad::evalkit::{event_metrics, EventAnnotation, DEFAULT_COLLAR};
use avvad::fusion::{attention_weights, fuse_and_classify, AvHeads};
use avvad::model::{glu_block_forward, AvvadNet, GluBlock, ModelConfig, Variant};
use avvad::numcore::gradcheck::GradCheckConfig;
use avvad::numcore::{binary_cross_entropy, conv2d, grad_check, gru_step, softmax, Gru, Mode, Tensor};
use avvad::synthgen::{random_specs, FrameLabels};
use avvad::training::{ablation_table, evaluate, median, sweep, synth_scenes, train, LossWeights, Objective, TrainConfig};
use avvad::EventClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

// gradient fidelity

fn gradient_fidelity() -> Check {
    let t = Instant::now();
    let cfg = ModelConfig::tiny();
    ensure(cfg.audio_channels.len() == 2 && cfg.visual_channels.len() == 2 && cfg.gru_hidden == 4, "tiny config shape")?;
    let mut worst = 0.0f64;
    let (mut checked, mut excluded) = (0, 0);
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let audio: Vec<f64> = (0..n * cfg.audio_frames * cfg.audio_bins).map(|_| rng.random_range(-2.0..2.0)).collect();
        let visual: Vec<f64> =
            (0..n * cfg.visual_frames * cfg.visual_size * cfg.visual_size).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut obj = Objective {
            net: AvvadNet::new(&cfg, seed).map_err(e)?,
            audio: Tensor::from_vec(&[n, 1, cfg.audio_frames, cfg.audio_bins], audio).map_err(e)?,
            visual: Tensor::from_vec(&[n, cfg.visual_frames, cfg.visual_size, cfg.visual_size], visual).map_err(e)?,
            targets: (0..n)
                .map(|i| FrameLabels::from_class(EventClass::TARGETS[(i + seed as usize) % 4], 0.5 * i as f64))
                .collect(),
            weights: LossWeights::default(),
            variant: Variant::Full,
        };
        let gc = GradCheckConfig { seed, ..GradCheckConfig::default() };
        let report = grad_check(&mut obj, 1e-4, &gc).map_err(e)?;
        worst = worst.max(report.max_rel_error());
        checked += report.checked.len();
        excluded += report.excluded.len();
    }
    let el = t.elapsed();
    ensure(worst < 1e-4, format!("max relative error {worst:.2e}"))?;
    ensure(el < Duration::from_secs(60), format!("took {el:?}"))?;
    Ok(format!("max rel error {worst:.2e} over {checked} coordinates ({excluded} kink-excluded), {el:.1?}"))
}

// attention invariants

fn attention_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut order_cases, mut scale_cases) = (0usize, 0usize);
    for i in 0..1000 {
        let d = 1 + i % 64;
        let q: Vec<f64> = (0..4 * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let k: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let att = attention_weights(&q, &k).map_err(e)?.att;
        let sum: f64 = att.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-6, format!("pair {i}: sum {sum}"))?;
        let score = |r: usize| (0..d).map(|j| q[r * d + j] * k[j]).sum::<f64>();
        for a in 0..4 {
            for b in 0..4 {
                if score(a) > score(b) {
                    order_cases += 1;
                    ensure(att[a] > att[b], format!("pair {i}: order {a} vs {b}"))?;
                }
            }
        }
        let c = rng.random_range(0.01..100.0);
        let ks: Vec<f64> = k.iter().map(|v| v * c).collect();
        let scaled = attention_weights(&q, &ks).map_err(e)?.att;
        let argmax = |p: &[f64; 4]| (0..4).max_by(|&x, &y| p[x].total_cmp(&p[y])).unwrap();
        ensure(argmax(&att) == argmax(&scaled), format!("pair {i}: argmax moved under scale {c}"))?;
        scale_cases += 1;
    }
    Ok(format!("1000 pairs, {order_cases} ordered comparisons, {scale_cases} scalings"))
}

// brute-force oracles

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn conv_oracle(x: &[f64], c: usize, h: usize, w: usize, k: &[f64], b: &[f64], ks: usize) -> Vec<f64> {
    let p = (ks / 2) as isize;
    let mut y = vec![0.0; b.len() * h * w];
    for o in 0..b.len() {
        for i in 0..h {
            for j in 0..w {
                let mut s = b[o];
                for ic in 0..c {
                    for a in 0..ks {
                        for bb in 0..ks {
                            let (ii, jj) = (i as isize + a as isize - p, j as isize + bb as isize - p);
                            if ii >= 0 && jj >= 0 && ii < h as isize && jj < w as isize {
                                s += k[((o * c + ic) * ks + a) * ks + bb] * x[(ic * h + ii as usize) * w + jj as usize];
                            }
                        }
                    }
                }
                y[(o * h + i) * w + j] = s;
            }
        }
    }
    y
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Check {
    const TOL: f64 = 1e-5;
    const N: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = [0.0f64; 7];
    let uni = |rng: &mut ChaCha8Rng, n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
    for _ in 0..N {
        // conv2d
        let (c, o, h, w) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(2..8), rng.random_range(2..8));
        let ks = [1, 3, 5][rng.random_range(0..3)];
        let x = uni(&mut rng, c * h * w, 1.0);
        let k = uni(&mut rng, o * c * ks * ks, 1.0);
        let b = uni(&mut rng, o, 1.0);
        let y = conv2d(
            &Tensor::from_vec(&[c, h, w], x.clone()).map_err(e)?,
            &Tensor::from_vec(&[o, c, ks, ks], k.clone()).map_err(e)?,
            &Tensor::from_vec(&[o], b.clone()).map_err(e)?,
        )
        .map_err(e)?;
        worst[0] = worst[0].max(max_diff(y.data(), &conv_oracle(&x, c, h, w, &k, &b, ks)));

        // gru_step
        let (ni, nh) = (rng.random_range(1..6), rng.random_range(1..6));
        let mut g = Gru::<f64>::new(ni, nh, &mut rng);
        for t in [&mut g.b_z, &mut g.b_r, &mut g.b_h] {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let xv = uni(&mut rng, ni, 1.0);
        let hv = uni(&mut rng, nh, 1.0);
        let mv = |m: &Tensor<f64>, v: &[f64], r: usize| (0..v.len()).map(|j| m.data()[r * v.len() + j] * v[j]).sum::<f64>();
        let z: Vec<f64> = (0..nh).map(|r| sig(mv(&g.w_z, &xv, r) + mv(&g.u_z, &hv, r) + g.b_z.data()[r])).collect();
        let rr: Vec<f64> = (0..nh).map(|r| sig(mv(&g.w_r, &xv, r) + mv(&g.u_r, &hv, r) + g.b_r.data()[r])).collect();
        let rh: Vec<f64> = (0..nh).map(|j| rr[j] * hv[j]).collect();
        let cand: Vec<f64> = (0..nh).map(|r| (mv(&g.w_h, &xv, r) + mv(&g.u_h, &rh, r) + g.b_h.data()[r]).tanh()).collect();
        let expect: Vec<f64> = (0..nh).map(|j| (1.0 - z[j]) * hv[j] + z[j] * cand[j]).collect();
        worst[1] = worst[1].max(max_diff(&gru_step(&xv, &hv, &g).map_err(e)?, &expect));

        // glu_block_forward (eval statistics)
        let (c, o, h, w) = (rng.random_range(1..4), rng.random_range(1..4), 2 * rng.random_range(1..4), 2 * rng.random_range(1..4));
        let mut blk = GluBlock::<f64>::new(c, o, 3, 0.0, &mut rng);
        for t in [&mut blk.bn.running_mean, &mut blk.bn.beta] {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        for t in [&mut blk.bn.running_var, &mut blk.bn.gamma] {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.5..2.0));
        }
        let x = uni(&mut rng, c * h * w, 1.0);
        let y = glu_block_forward(&Tensor::from_vec(&[c, h, w], x.clone()).map_err(e)?, &blk, Mode::Eval).map_err(e)?;
        let v = conv_oracle(&x, c, h, w, blk.value.kernel.data(), blk.value.bias.data(), 3);
        let gt = conv_oracle(&x, c, h, w, blk.gate.kernel.data(), blk.gate.bias.data(), 3);
        let mut expect = vec![0.0; o * (h / 2) * (w / 2)];
        for ch in 0..o {
            let bn = &blk.bn;
            let f = |idx: usize| {
                let u = v[idx] * sig(gt[idx]);
                (bn.gamma.data()[ch] * (u - bn.running_mean.data()[ch]) / (bn.running_var.data()[ch] + bn.eps).sqrt()
                    + bn.beta.data()[ch])
                    .max(0.0)
            };
            for i in 0..h / 2 {
                for j in 0..w / 2 {
                    let at = |a: usize, b: usize| f((ch * h + 2 * i + a) * w + 2 * j + b);
                    expect[(ch * (h / 2) + i) * (w / 2) + j] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
                }
            }
        }
        worst[2] = worst[2].max(max_diff(y.data(), &expect));

        // softmax
        let n = rng.random_range(1..10);
        let z = uni(&mut rng, n, 30.0);
        let total: f64 = z.iter().map(|v| v.exp()).sum();
        let expect: Vec<f64> = z.iter().map(|v| v.exp() / total).collect();
        worst[3] = worst[3].max(max_diff(&softmax(&z).map_err(e)?, &expect));

        // binary cross-entropy
        let p: f64 = rng.random_range(0.001..0.999);
        let y: f64 = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let expect = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        worst[4] = worst[4].max((binary_cross_entropy(p, y).map_err(e)? - expect).abs());

        // attention_weights and fuse_and_classify
        let d = rng.random_range(1..10);
        let q = uni(&mut rng, 4 * d, 2.0);
        let k = uni(&mut rng, d, 2.0);
        let s: Vec<f64> = (0..4).map(|r| (0..d).map(|j| q[r * d + j] * k[j]).sum::<f64>() / (d as f64).sqrt()).collect();
        let zs: f64 = s.iter().map(|v| v.exp()).sum();
        let att: Vec<f64> = s.iter().map(|v| v.exp() / zs).collect();
        worst[5] = worst[5].max(max_diff(&attention_weights(&q, &k).map_err(e)?.att, &att));
        let heads = AvHeads::<f64>::new(d, &mut rng);
        let (fused, probs) = fuse_and_classify(&q, &k, &heads).map_err(e)?;
        let mut ef = Vec::new();
        let mut ep = Vec::new();
        for r in 0..4 {
            let row: Vec<f64> = (0..d).map(|j| att[r] * q[r * d + j]).collect();
            let hd = &heads.heads[r];
            ep.push(sig(hd.bias.data()[0] + (0..d).map(|j| hd.weight.data()[j] * row[j]).sum::<f64>()));
            ef.extend(row);
        }
        worst[6] = worst[6].max(max_diff(&fused, &ef)).max(max_diff(&probs, &ep));
    }
    let names = ["conv2d", "gru_step", "glu_block_forward", "softmax", "bce", "attention_weights", "fuse_and_classify"];
    for (n, w) in names.iter().zip(worst) {
        ensure(w <= TOL, format!("{n}: deviation {w:.2e}"))?;
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    Ok(format!("{N} instances x {} operations, max deviation {max:.1e}", names.len()))
}

// metric fixtures

fn ev(onset: f64, offset: f64, label: EventClass) -> EventAnnotation {
    EventAnnotation::new(onset, offset, label).unwrap()
}

fn metric_oracle() -> Check {
    use EventClass::*;
    // (name, reference, detected, N, C, S, I, D, ER)
    #[allow(clippy::type_complexity)]
    let fixtures: Vec<(&str, Vec<EventAnnotation>, Vec<EventAnnotation>, [usize; 5], &str)> = vec![
        (
            "perfect",
            vec![ev(0.0, 2.0, Silence), ev(2.0, 5.0, Speech)],
            vec![ev(0.0, 2.0, Silence), ev(2.0, 5.0, Speech)],
            [2, 2, 0, 0, 0],
            "0.0000",
        ),
        ("missed", vec![ev(0.0, 3.0, Speech)], vec![], [1, 0, 0, 0, 1], "1.0000"),
        (
            "one correct one spurious",
            vec![ev(0.0, 2.0, Speech), ev(3.0, 5.0, Singing)],
            vec![ev(0.0, 2.0, Speech), ev(6.0, 8.0, Others)],
            [2, 1, 0, 1, 1],
            "1.0000",
        ),
        ("substitution", vec![ev(0.0, 2.0, Speech)], vec![ev(0.1, 2.1, Singing)], [1, 0, 1, 0, 0], "1.0000"),
        ("late onset", vec![ev(1.0, 3.0, Speech)], vec![ev(1.3, 3.0, Speech)], [1, 0, 0, 1, 1], "2.0000"),
        ("wide offset collar", vec![ev(0.0, 4.0, Speech)], vec![ev(0.1, 5.9, Speech)], [1, 1, 0, 0, 0], "0.0000"),
        ("offset past collar", vec![ev(0.0, 4.0, Speech)], vec![ev(0.0, 6.1, Speech)], [1, 0, 0, 1, 1], "2.0000"),
        (
            "correct plus substitution",
            vec![ev(0.0, 1.0, Speech), ev(1.0, 2.0, Silence)],
            vec![ev(0.1, 1.0, Speech), ev(0.9, 2.0, Speech)],
            [2, 1, 1, 0, 0],
            "0.5000",
        ),
        (
            "split detection",
            vec![ev(0.0, 4.0, Singing)],
            vec![ev(0.0, 2.0, Singing), ev(2.0, 4.0, Singing)],
            [1, 1, 0, 1, 0],
            "1.0000",
        ),
        (
            "merged detection",
            vec![ev(0.0, 1.0, Speech), ev(1.5, 2.5, Speech)],
            vec![ev(0.0, 2.5, Speech)],
            [2, 0, 0, 1, 2],
            "1.5000",
        ),
        ("empty reference", vec![], vec![ev(0.0, 1.0, Speech), ev(2.0, 3.0, Others)], [0, 0, 0, 2, 0], "2.0000"),
        (
            "mixed scene",
            vec![ev(0.0, 2.0, Silence), ev(2.0, 4.0, Speech), ev(4.0, 7.0, Singing), ev(7.0, 10.0, Others)],
            vec![
                ev(0.0, 2.1, Silence),
                ev(2.15, 4.0, Singing),
                ev(4.5, 7.0, Singing),
                ev(7.0, 10.0, Others),
                ev(8.0, 9.0, Speech),
            ],
            [4, 2, 1, 2, 1],
            "1.0000",
        ),
        (
            "unordered input",
            vec![ev(7.0, 10.0, Others), ev(0.0, 2.0, Silence)],
            vec![ev(0.05, 2.0, Silence), ev(6.9, 9.5, Others)],
            [2, 2, 0, 0, 0],
            "0.0000",
        ),
    ];
    for (name, r, d, [n, c, s, i, del], er) in &fixtures {
        let m = event_metrics(r, d, DEFAULT_COLLAR).map_err(e)?;
        let o = m.overall;
        let got = [o.reference, o.correct, o.substitutions, o.insertions, o.deletions];
        ensure(got == [*n, *c, *s, *i, *del], format!("{name}: N/C/S/I/D {got:?}, expected {:?}", [n, c, s, i, del]))?;
        let got_er = format!("{:.4}", o.error_rate());
        ensure(&got_er == er, format!("{name}: ER {got_er}, expected {er}"))?;
    }
    // worked example: P = R = F = 50%
    let m = event_metrics(&fixtures[2].1, &fixtures[2].2, DEFAULT_COLLAR).map_err(e)?;
    ensure(
        (m.overall.precision() - 50.0).abs() < 1e-9 && (m.overall.recall() - 50.0).abs() < 1e-9 && (m.f_score() - 50.0).abs() < 1e-9,
        "worked example P/R/F",
    )?;
    let m = event_metrics(&fixtures[1].1, &fixtures[1].2, DEFAULT_COLLAR).map_err(e)?;
    ensure(m.overall.recall() == 0.0, "missed: recall")?;
    Ok(format!("{} fixtures", fixtures.len()))
}

// training criteria

fn overfit() -> Check {
    let t = Instant::now();
    let data = synth_scenes(&random_specs(1, 7, 10.0)).map_err(e)?;
    let mut model = ModelConfig::default();
    model.dropout = 0.0;
    let cfg = TrainConfig { epochs: 1000, max_steps: Some(500), model, ..Default::default() };
    let out = train(&data, &cfg).map_err(e)?;
    let last = out.losses.last().map(|l| l.total).unwrap_or(f64::NAN);
    let f = evaluate(&out.net, &out.norm, &data, Variant::Full).map_err(e)?.f_score();
    let el = t.elapsed();
    ensure(out.steps <= 500, format!("{} steps", out.steps))?;
    ensure(last < 0.01, format!("final loss {last:.4}"))?;
    ensure(f >= 99.0, format!("F {f:.2}%"))?;
    ensure(el < Duration::from_secs(600), format!("took {el:?}"))?;
    Ok(format!("{} steps, final loss {last:.5}, F {f:.2}%, {el:.1?}", out.steps))
}

const BENCH_SCENES: usize = 60;
const BENCH_EPOCHS: usize = 10;

fn benchmark() -> std::result::Result<Vec<avvad::training::SceneData>, String> {
    synth_scenes(&random_specs(BENCH_SCENES, 0, 10.0)).map_err(e)
}

fn ablation_trend() -> Check {
    let t = Instant::now();
    let data = benchmark()?;
    let cfg = TrainConfig { epochs: BENCH_EPOCHS, ..Default::default() };
    let seeds = [0u64, 1, 2, 3, 4];
    let results = ablation_table(&data, &cfg, &seeds).map_err(e)?;
    let f = |v: Variant| -> Vec<f64> { results.iter().filter(|r| r.variant == v).map(|r| r.report.f_score()).collect() };
    let (full, audio, visual) = (f(Variant::Full), f(Variant::AudioOnly), f(Variant::VisualOnly));
    let wins = full.iter().zip(&audio).filter(|(a, b)| a > b).count();
    let (mf, ma, mv) = (median(&mut full.clone()), median(&mut audio.clone()), median(&mut visual.clone()));
    let el = t.elapsed();
    let detail = format!("median F full {mf:.2} / audio {ma:.2} / visual {mv:.2}, full > audio in {wins}/5 seeds, {el:.0?}");
    ensure(mf > ma && ma > mv, format!("ordering violated: {detail}"))?;
    ensure(wins >= 4, format!("too few wins: {detail}"))?;
    ensure(el < Duration::from_secs(7200), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn lambda_sweep() -> Check {
    let data = benchmark()?;
    let cfg = TrainConfig { epochs: BENCH_EPOCHS, ..Default::default() };
    let rows = sweep(&data, &cfg).map_err(e)?;
    ensure(rows.len() == 6, format!("{} rows", rows.len()))?;
    let expected = avvad::training::SWEEP_ROWS;
    for (r, x) in rows.iter().zip(expected) {
        ensure(r.lambda == x, format!("row order {:?} vs {x:?}", r.lambda))?;
        ensure(r.report.f_score().is_finite(), "non-finite F")?;
    }
    let fs: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.report.f_score())).collect();
    Ok(format!("six rows, F = [{}]", fs.join(", ")))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(e)?;
    let bin = env!("CARGO_BIN_EXE_avvad");
    let run = |args: &[&str]| -> std::result::Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(e)?;
        ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())
    };
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let data = dir.path().join("data");
    run(&["gen", "--scenes", "4", "--seconds", "5", "--seed", "3", "--out", &p(&data)])?;
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "manifest = data\nepochs = 2\nmax_steps = 10\nseed = 5\n").map_err(e)?;
    for name in ["a", "b"] {
        run(&["--config", &p(&cfg), "--out", &p(&dir.path().join(name)), "train"])?;
    }
    for f in ["model.ckpt", "loss.tsv"] {
        let a = fs::read(dir.path().join("a").join(f)).map_err(e)?;
        let b = fs::read(dir.path().join("b").join(f)).map_err(e)?;
        ensure(!a.is_empty() && a == b, format!("{f} differs between runs"))?;
    }
    Ok("two train runs: identical checkpoint and loss log".into())
}

fn dsp() -> Check {
    let blocks = stft_logmel(&AudioClip::new(vec![0.0; 16000], 16000).map_err(e)?).map_err(e)?;
    ensure(blocks.len() == 1 && blocks[0].frames == 44, "1 s should give one 44-frame block")?;
    let floor = 1e-10f64.ln();
    ensure(blocks[0].values.iter().all(|&v| (v as f64 - floor).abs() < 1e-4), "zero input not at floor")?;

    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let top = mel(8000.0);
    let centers: Vec<f64> = (1..=64).map(|i| 700.0 * (10f64.powf(top * i as f64 / 65.0 / 2595.0) - 1.0)).collect();
    let nearest = (0..64).min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs())).unwrap();
    let samples = (0..16000).map(|i| (0.5 * (2.0 * PI * 1000.0 * i as f64 / 16000.0).sin()) as f32).collect();
    let blocks = stft_logmel(&AudioClip::new(samples, 16000).map_err(e)?).map_err(e)?;
    for t in 0..44 {
        let row = blocks[0].frame(t);
        let arg = (0..64).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        ensure(arg == nearest, format!("frame {t}: peak bank {arg}, oracle {nearest}"))?;
    }
    Ok(format!("floor ln(1e-10), 44 frames, 1 kHz peak in bank {nearest}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("gradient fidelity", gradient_fidelity),
        ("attention invariants", attention_invariants),
        ("oracle equivalence", oracle_equivalence),
        ("metric oracle", metric_oracle),
        ("dsp", dsp),
        ("determinism", determinism),
        ("overfit", overfit),
        ("lambda sweep", lambda_sweep),
        ("ablation trend", ablation_trend),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
