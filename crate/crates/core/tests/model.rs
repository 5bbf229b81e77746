use avvad::model::*;
use avvad::numcore::{Mode, Module, Tensor};
use avvad::training::{batch_loss, LossWeights};
use avvad::synthgen::FrameLabels;
use avvad::EventClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// naive reference implementation, plain loops in f64

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// same-padded cross-correlation, x is C x H x W
fn conv(x: &[f64], c: usize, h: usize, w: usize, k: &[f64], b: &[f64], ks: usize) -> Vec<f64> {
    let o = b.len();
    let p = (ks / 2) as isize;
    let mut y = vec![0.0; o * h * w];
    for oc in 0..o {
        for i in 0..h {
            for j in 0..w {
                let mut s = b[oc];
                for ic in 0..c {
                    for a in 0..ks {
                        for bb in 0..ks {
                            let (ii, jj) = (i as isize + a as isize - p, j as isize + bb as isize - p);
                            if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                                continue;
                            }
                            s += k[((oc * c + ic) * ks + a) * ks + bb] * x[(ic * h + ii as usize) * w + jj as usize];
                        }
                    }
                }
                y[(oc * h + i) * w + j] = s;
            }
        }
    }
    y
}

fn block(x: &[f64], c: usize, h: usize, w: usize, g: &GluBlock<f64>) -> (Vec<f64>, usize, usize, usize) {
    let ks = g.value.k();
    let o = g.c_out();
    let v = conv(x, c, h, w, g.value.kernel.data(), g.value.bias.data(), ks);
    let gt = conv(x, c, h, w, g.gate.kernel.data(), g.gate.bias.data(), ks);
    let bn = &g.bn;
    let mut a = vec![0.0; o * h * w];
    for ch in 0..o {
        let (m, var) = (bn.running_mean.data()[ch], bn.running_var.data()[ch]);
        let (gm, be) = (bn.gamma.data()[ch], bn.beta.data()[ch]);
        for i in 0..h * w {
            let idx = ch * h * w + i;
            let u = v[idx] * sig(gt[idx]);
            a[idx] = (gm * (u - m) / (var + bn.eps).sqrt() + be).max(0.0);
        }
    }
    let (h2, w2) = (h / 2, w / 2);
    let mut y = vec![0.0; o * h2 * w2];
    for ch in 0..o {
        for i in 0..h2 {
            for j in 0..w2 {
                let at = |di: usize, dj: usize| a[(ch * h + 2 * i + di) * w + 2 * j + dj];
                y[(ch * h2 + i) * w2 + j] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
            }
        }
    }
    (y, o, h2, w2)
}

fn dense(x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (o, i) = (w.shape()[0], w.shape()[1]);
    (0..o).map(|r| b.data()[r] + (0..i).map(|c| w.data()[r * i + c] * x[c]).sum::<f64>()).collect()
}

fn matvec(m: &Tensor<f64>, x: &[f64]) -> Vec<f64> {
    let cols = m.shape()[1];
    (0..m.shape()[0]).map(|r| (0..cols).map(|c| m.data()[r * cols + c] * x[c]).sum()).collect()
}

struct Reference {
    q: Vec<Vec<f64>>,
    p_audio: [f64; 4],
    k: Vec<f64>,
    p_visual: f64,
    p_av: [f64; 4],
}

fn reference(net: &AvvadNet<f64>, audio: &[f64], visual: &[f64]) -> Reference {
    let cfg = &net.config;
    let (mut x, mut c, mut h, mut w) = (audio.to_vec(), 1, cfg.audio_frames, cfg.audio_bins);
    for b in &net.audio.blocks {
        (x, c, h, w) = block(&x, c, h, w, b);
    }
    let mut q = Vec::new();
    let mut p_audio = [0.0; 4];
    for (i, sb) in net.audio.subbranches.iter().enumerate() {
        let g = &sb.gru;
        let mut state = vec![0.0; g.hidden()];
        for t in 0..h {
            let xt: Vec<f64> = (0..c).flat_map(|ch| (0..w).map(move |f| (ch, f))).map(|(ch, f)| x[(ch * h + t) * w + f]).collect();
            let add = |a: Vec<f64>, b: Vec<f64>, bias: &Tensor<f64>| -> Vec<f64> {
                a.iter().zip(&b).zip(bias.data()).map(|((x, y), z)| x + y + z).collect()
            };
            let z: Vec<f64> = add(matvec(&g.w_z, &xt), matvec(&g.u_z, &state), &g.b_z).into_iter().map(sig).collect();
            let r: Vec<f64> = add(matvec(&g.w_r, &xt), matvec(&g.u_r, &state), &g.b_r).into_iter().map(sig).collect();
            let rh: Vec<f64> = r.iter().zip(&state).map(|(a, b)| a * b).collect();
            let cand: Vec<f64> = add(matvec(&g.w_h, &xt), matvec(&g.u_h, &rh), &g.b_h).into_iter().map(f64::tanh).collect();
            state = (0..state.len()).map(|j| (1.0 - z[j]) * state[j] + z[j] * cand[j]).collect();
        }
        let e = dense(&state, &sb.embed.weight, &sb.embed.bias);
        p_audio[i] = sig(dense(&e, &sb.head.weight, &sb.head.bias)[0]);
        q.push(e);
    }
    let (mut y, mut c, mut h, mut w) = (visual.to_vec(), cfg.visual_frames, cfg.visual_size, cfg.visual_size);
    for b in &net.visual.blocks {
        (y, c, h, w) = block(&y, c, h, w, b);
    }
    let _ = (c, h, w);
    let k = dense(&y, &net.visual.embed.weight, &net.visual.embed.bias);
    let p_visual = sig(dense(&k, &net.visual.head.weight, &net.visual.head.bias)[0]);
    let d = k.len() as f64;
    let scores: Vec<f64> = q.iter().map(|qi| qi.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
    let mx = scores.iter().cloned().fold(f64::MIN, f64::max);
    let ex: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
    let tot: f64 = ex.iter().sum();
    let mut p_av = [0.0; 4];
    for i in 0..4 {
        let fused: Vec<f64> = q[i].iter().map(|v| v * ex[i] / tot).collect();
        let hd = &net.heads.heads[i];
        p_av[i] = sig(dense(&fused, &hd.weight, &hd.bias)[0]);
    }
    Reference { q, p_audio, k, p_visual, p_av }
}

fn randomize_running(net: &mut AvvadNet<f64>, rng: &mut ChaCha8Rng) {
    let mut bufs = Vec::new();
    net.buffers_mut("", &mut bufs);
    for (name, t) in bufs {
        for v in t.data_mut() {
            *v = if name.ends_with("var") { rng.random_range(0.5..2.0) } else { rng.random_range(-0.3..0.3) };
        }
    }
    let mut params = Vec::new();
    net.parameters_mut("", &mut params);
    for (name, t) in params {
        if name.ends_with("gamma") || name.ends_with("beta") || name.contains("bias") || name.contains("b_") {
            for v in t.data_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
    }
}

fn random_inputs(cfg: &ModelConfig, n: usize, rng: &mut ChaCha8Rng) -> (Tensor<f64>, Tensor<f64>) {
    let a = (0..n * cfg.audio_frames * cfg.audio_bins).map(|_| rng.random_range(-2.0..2.0)).collect();
    let v = (0..n * cfg.visual_frames * cfg.visual_size * cfg.visual_size).map(|_| rng.random_range(0.0..1.0)).collect();
    (
        Tensor::from_vec(&[n, 1, cfg.audio_frames, cfg.audio_bins], a).unwrap(),
        Tensor::from_vec(&[n, cfg.visual_frames, cfg.visual_size, cfg.visual_size], v).unwrap(),
    )
}

#[test]
fn forward_matches_reference_on_random_instances() {
    let cfg = ModelConfig::tiny();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = AvvadNet::<f64>::new(&cfg, seed).unwrap();
        randomize_running(&mut net, &mut rng);
        let (a, v) = random_inputs(&cfg, 2, &mut rng);
        let (out, _) = net.forward(&a, &v, Variant::Full, Mode::Eval, None).unwrap();
        for i in 0..2 {
            let al = cfg.audio_frames * cfg.audio_bins;
            let vl = cfg.visual_frames * cfg.visual_size * cfg.visual_size;
            let r = reference(&net, &a.data()[i * al..(i + 1) * al], &v.data()[i * vl..(i + 1) * vl]);
            let b = out.branch(i).unwrap();
            let mut diff = |x: f64, y: f64| worst = worst.max((x - y).abs());
            for j in 0..4 {
                diff(b.p_audio[j], r.p_audio[j]);
                diff(out.p_av(i).unwrap()[j], r.p_av[j]);
                for (x, y) in b.q[j * cfg.embed_dim..(j + 1) * cfg.embed_dim].iter().zip(&r.q[j]) {
                    diff(*x, *y);
                }
            }
            diff(b.p_visual, r.p_visual);
            for (x, y) in b.k.iter().zip(&r.k) {
                diff(*x, *y);
            }
        }
    }
    assert!(worst < 1e-9, "max deviation {worst}");
}

#[test]
fn glu_with_closed_gate_halves_the_value_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut g = GluBlock::<f64>::new(2, 3, 3, 0.0, &mut rng);
    g.gate.kernel.data_mut().iter_mut().for_each(|v| *v = 0.0);
    g.gate.bias.data_mut().iter_mut().for_each(|v| *v = 0.0);
    let x: Vec<f64> = (0..2 * 6 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = glu_block_forward(&Tensor::from_vec(&[2, 6, 6], x.clone()).unwrap(), &g, Mode::Eval).unwrap();
    let v = conv(&x, 2, 6, 6, g.value.kernel.data(), g.value.bias.data(), 3);
    let s = (1.0 + g.bn.eps).sqrt();
    for ch in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(a, b)| (0.5 * v[(ch * 6 + 2 * i + a) * 6 + 2 * j + b] / s).max(0.0))
                    .fold(0.0, f64::max);
                assert!((y.data()[(ch * 3 + i) * 3 + j] - m).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn glu_scalar_composition_by_hand() {
    // one channel, 4x4 input, 1x1 kernels: value 2x+1, gate x
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut g = GluBlock::<f64>::new(1, 1, 1, 0.0, &mut rng);
    g.value.kernel.data_mut()[0] = 2.0;
    g.value.bias.data_mut()[0] = 1.0;
    g.gate.kernel.data_mut()[0] = 1.0;
    g.gate.bias.data_mut()[0] = 0.0;
    let x = vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, -3.0, 0.5, 0.25, -0.5, 1.5, -1.5, 4.0, -4.0, 0.75, 0.1];
    let y = glu_block_forward(&Tensor::from_vec(&[1, 4, 4], x.clone()).unwrap(), &g, Mode::Eval).unwrap();
    let f = |v: f64| ((2.0 * v + 1.0) * sig(v) / (1.0 + 1e-5f64).sqrt()).max(0.0);
    let expect = [
        f(-2.0).max(f(-1.0)).max(f(2.0)).max(f(3.0)),
        f(0.0).max(f(1.0)).max(f(-3.0)).max(f(0.5)),
        f(0.25).max(f(-0.5)).max(f(4.0)).max(f(-4.0)),
        f(1.5).max(f(-1.5)).max(f(0.75)).max(f(0.1)),
    ];
    assert_eq!(y.shape(), &[1, 2, 2]);
    for (a, b) in y.data().iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn first_audio_block_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = GluBlock::<f32>::new(1, 16, 3, 0.2, &mut rng);
    let x = Tensor::from_vec(&[1, 44, 64], vec![0.1f32; 44 * 64]).unwrap();
    let y = glu_block_forward(&x, &g, Mode::Eval).unwrap();
    assert_eq!(y.shape(), &[16, 22, 32]);
}

#[test]
fn default_architecture_contract() {
    let cfg = ModelConfig::default();
    let net = AvvadNet::<f32>::new(&cfg, 0).unwrap();
    assert_eq!(net.audio.blocks.len(), 4);
    assert_eq!(net.audio.subbranches.len(), 4);
    assert_eq!(net.visual.blocks.len(), 4);
    assert_eq!(net.heads.heads.len(), 4);
    for sb in &net.audio.subbranches {
        assert_eq!(sb.embed.outputs(), 128);
        assert_eq!(sb.head.outputs(), 1);
    }
    assert_eq!(net.visual.embed.outputs(), 128);
    assert_eq!(net.parameter_count(), 449_737);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = Tensor::from_vec(&[3, 1, 44, 64], (0..3 * 44 * 64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let v = Tensor::from_vec(&[3, 8, 32, 32], (0..3 * 8 * 32 * 32).map(|_| rng.random()).collect()).unwrap();
    let (o1, _) = net.forward(&a, &v, Variant::Full, Mode::Eval, None).unwrap();
    let (o2, _) = net.forward(&a, &v, Variant::Full, Mode::Eval, None).unwrap();
    assert_eq!(o1.audio.as_ref().unwrap().q.shape(), &[3, 4, 128]);
    assert_eq!(o1.visual.as_ref().unwrap().k.shape(), &[3, 128]);
    for i in 0..3 {
        assert_eq!(o1.p_av(i), o2.p_av(i));
        let p = o1.p_av(i).unwrap();
        assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

#[test]
fn zero_weight_heads_give_sigmoid_of_bias() {
    let cfg = ModelConfig::tiny();
    let mut net = AvvadNet::<f64>::new(&cfg, 3).unwrap();
    for (i, sb) in net.audio.subbranches.iter_mut().enumerate() {
        sb.head.weight.data_mut().iter_mut().for_each(|v| *v = 0.0);
        sb.head.bias.data_mut()[0] = i as f64 - 1.5;
    }
    let mut a = vec![0.0; cfg.audio_frames * cfg.audio_bins];
    a[0] = 1.0;
    let a = Tensor::from_vec(&[1, 1, cfg.audio_frames, cfg.audio_bins], a).unwrap();
    let v = Tensor::zeros(&[1, cfg.visual_frames, cfg.visual_size, cfg.visual_size]);
    let (out, _) = net.forward(&a, &v, Variant::AudioOnly, Mode::Eval, None).unwrap();
    let p = out.p_audio(0).unwrap();
    for i in 0..4 {
        assert!((p[i] - sig(i as f64 - 1.5)).abs() < 1e-15);
    }
    assert!(out.p_visual(0).is_none() && out.p_av(0).is_none());
}

#[test]
fn visual_branch_sees_content_and_frame_order() {
    let cfg = ModelConfig::tiny();
    let net = AvvadNet::<f64>::new(&cfg, 5).unwrap();
    let px = cfg.visual_size * cfg.visual_size;
    let a = Tensor::zeros(&[1, 1, cfg.audio_frames, cfg.audio_bins]);
    let run = |frames: Vec<f64>| {
        let v = Tensor::from_vec(&[1, cfg.visual_frames, cfg.visual_size, cfg.visual_size], frames).unwrap();
        net.forward(&a, &v, Variant::VisualOnly, Mode::Eval, None).unwrap().0.p_visual(0).unwrap()
    };
    assert_ne!(run(vec![0.0; 2 * px]), run(vec![1.0; 2 * px]));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let frames: Vec<f64> = (0..2 * px).map(|_| rng.random()).collect();
    let mut swapped = frames[px..].to_vec();
    swapped.extend_from_slice(&frames[..px]);
    assert_ne!(run(frames), run(swapped));
}

#[test]
fn every_parameter_receives_gradient() {
    let cfg = ModelConfig::tiny();
    let mut net = AvvadNet::<f64>::new(&cfg, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, v) = random_inputs(&cfg, 4, &mut rng);
    let targets: Vec<FrameLabels> =
        [EventClass::Speech, EventClass::Silence, EventClass::Singing, EventClass::Others].iter().map(|&c| FrameLabels::from_class(c, 0.0)).collect();
    let (out, cache) = net.forward(&a, &v, Variant::Full, Mode::Train, None).unwrap();
    let (_, grads) = batch_loss(&out, &targets, &LossWeights::default()).unwrap();
    net.zero_grad();
    net.backward(&cache, &grads);
    let mut params = Vec::new();
    net.parameters("", &mut params);
    for (name, t) in params {
        let g = t.grad().unwrap();
        assert!(g.iter().any(|x| *x != 0.0), "{name} has no gradient");
    }
}

#[test]
fn zero_weights_give_zero_logit_gradients() {
    let cfg = ModelConfig::tiny();
    let net = AvvadNet::<f64>::new(&cfg, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (a, v) = random_inputs(&cfg, 3, &mut rng);
    let targets = vec![FrameLabels::from_class(EventClass::Singing, 0.0); 3];
    let (out, _) = net.forward(&a, &v, Variant::Full, Mode::Eval, None).unwrap();
    let mut w = LossWeights::default();
    w.lambda[..4].iter_mut().for_each(|l| *l = 0.0);
    w.lambda[6] = 0.0;
    let (report, grads) = batch_loss(&out, &targets, &w).unwrap();
    assert!(grads.audio.as_ref().unwrap().data().iter().all(|&g| g == 0.0));
    let av = grads.av.as_ref().unwrap();
    for i in 0..3 {
        assert_eq!(av.data()[i * 4 + 1], 0.0);
        assert_ne!(av.data()[i * 4], 0.0);
    }
    assert!(report.total > 0.0);
}

#[test]
fn silenced_visual_term_leaves_visual_head_untouched() {
    let cfg = ModelConfig::tiny();
    let mut net = AvvadNet::<f64>::new(&cfg, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (a, v) = random_inputs(&cfg, 2, &mut rng);
    let targets = vec![FrameLabels::from_class(EventClass::Speech, 0.0); 2];
    let mut w = LossWeights::default();
    w.lambda[4] = 0.0;
    let (out, cache) = net.forward(&a, &v, Variant::Full, Mode::Train, None).unwrap();
    let (_, grads) = batch_loss(&out, &targets, &w).unwrap();
    net.zero_grad();
    net.backward(&cache, &grads);
    for t in [&net.visual.head.weight, &net.visual.head.bias] {
        assert!(t.grad().is_none_or(|g| g.iter().all(|&x| x == 0.0)));
    }
    assert!(net.visual.embed.weight.grad().unwrap().iter().any(|&g| g != 0.0));
}
