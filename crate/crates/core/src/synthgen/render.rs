//! Signal recipes for the synthetic scene components. All generators return
//! `f64` buffers of the requested length; levels are normalized by the caller.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A rendered voice and its amplitude envelope in `[0, 1]`.
pub(crate) struct Voice {
    pub samples: Vec<f64>,
    pub envelope: Vec<f64>,
}

fn formant_gain(f: f64, f1: f64, f2: f64) -> f64 {
    1.0 + 2.0 * (-((f - f1) / 150.0).powi(2)).exp() + 1.5 * (-((f - f2) / 250.0).powi(2)).exp()
}

/// Harmonic complex with syllabic amplitude modulation around 4 Hz, drifting
/// intonation and envelope-gated fricative noise.
pub(crate) fn speech<R: Rng>(len: usize, sr: f64, rng: &mut R) -> Voice {
    let f0_base = rng.random_range(120.0..250.0);
    let (p1, p2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let rate = rng.random_range(3.5..4.5);
    let noise = Normal::new(0.0, 1.0).unwrap();

    let mut samples = vec![0.0; len];
    let mut envelope = vec![0.0; len];
    let mut phase = 0.0f64;
    let mut prev_noise = 0.0;
    let mut start = 0usize;
    while start < len {
        let dur = ((rng.random_range(0.8..1.2) / rate) * sr) as usize;
        let pause = (rng.random_range(0.0..0.06) * sr) as usize;
        let amp = rng.random_range(0.6..1.0);
        let fric = rng.random_range(0.0..0.4);
        let (f1, f2) = (rng.random_range(400.0..800.0), rng.random_range(1000.0..2200.0));
        let n_harm = (4000.0 / f0_base) as usize;
        let gains: Vec<f64> = (1..=n_harm)
            .map(|k| formant_gain(k as f64 * f0_base, f1, f2) / k as f64)
            .collect();
        let end = (start + dur).min(len);
        for i in start..end {
            let t = i as f64 / sr;
            let u = (i - start) as f64 / dur as f64;
            let env = amp * (std::f64::consts::PI * u).sin().max(0.0).powf(1.5);
            let f0 = f0_base * (1.0 + 0.08 * (TAU * 0.7 * t + p1).sin() + 0.04 * (TAU * 1.9 * t + p2).sin());
            phase = (phase + TAU * f0 / sr) % (TAU * 64.0);
            let voiced: f64 = gains
                .iter()
                .enumerate()
                .map(|(k, g)| g * ((k + 1) as f64 * phase).sin())
                .sum();
            let n = noise.sample(rng);
            let hp = n - prev_noise;
            prev_noise = n;
            samples[i] = env * (voiced + fric * hp);
            envelope[i] = env;
        }
        start = end + pause;
    }
    Voice { samples, envelope }
}

/// Sustained pentatonic notes with 5-7 Hz vibrato.
pub(crate) fn singing<R: Rng>(len: usize, sr: f64, rng: &mut R) -> Voice {
    const STEPS: [f64; 6] = [0.0, 2.0, 4.0, 7.0, 9.0, 12.0];
    let base = rng.random_range(200.0..300.0);
    let vib_rate = rng.random_range(5.0..7.0);
    let vib_depth = rng.random_range(0.01..0.02);
    let attack = 0.04 * sr;
    let release = 0.06 * sr;

    let mut samples = vec![0.0; len];
    let mut envelope = vec![0.0; len];
    let mut phase = 0.0f64;
    let mut start = 0usize;
    while start < len {
        let dur = (rng.random_range(0.5..1.0) * sr) as usize;
        let f0 = base * 2f64.powf(STEPS[rng.random_range(0..STEPS.len())] / 12.0);
        let level = rng.random_range(0.85..1.0);
        let n_harm = (5000.0 / f0) as usize;
        let gains: Vec<f64> = (1..=n_harm)
            .map(|k| {
                let f = k as f64 * f0;
                (1.0 + 1.5 * (-((f - 3000.0) / 400.0).powi(2)).exp()) / (k as f64).powf(0.8)
            })
            .collect();
        let end = (start + dur).min(len);
        for i in start..end {
            let t = i as f64 / sr;
            let pos = (i - start) as f64;
            let ramp = (pos / attack).min(((end - i) as f64) / release).min(1.0);
            let env = level * ramp * (1.0 + 0.03 * (TAU * vib_rate * t).sin()) / 1.03;
            let f = f0 * (1.0 + vib_depth * (TAU * vib_rate * t).sin());
            phase = (phase + TAU * f / sr) % (TAU * 64.0);
            let voiced: f64 = gains
                .iter()
                .enumerate()
                .map(|(k, g)| g * ((k + 1) as f64 * phase).sin())
                .sum();
            samples[i] = env * voiced;
            envelope[i] = env;
        }
        start = end;
    }
    Voice { samples, envelope }
}

/// Dense, randomly timed noise bursts (audience applause).
pub(crate) fn applause<R: Rng>(len: usize, sr: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let rate = rng.random_range(25.0..40.0);
    let mut out = vec![0.0; len];
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate;
        let start = (t * sr) as usize;
        if start >= len {
            break;
        }
        let amp = rng.random_range(0.3..1.0);
        let burst = (0.012 * sr) as usize;
        let mut prev = 0.0;
        for j in 0..burst.min(len - start) {
            let n = noise.sample(rng);
            let hp = n - 0.7 * prev;
            prev = n;
            out[start + j] += amp * hp * (-(j as f64) / (0.003 * sr)).exp();
        }
    }
    out
}

/// Chord tones with a bass line, a pulsing rhythm and low-passed noise.
pub(crate) fn music<R: Rng>(len: usize, sr: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let tempo = rng.random_range(1.5..2.5);
    let mut out = vec![0.0; len];
    let mut start = 0usize;
    let mut lp = 0.0;
    while start < len {
        let dur = (rng.random_range(1.5..2.5) * sr) as usize;
        let root = 45.0 + rng.random_range(0..12) as f64;
        let third = if rng.random_bool(0.5) { 4.0 } else { 3.0 };
        let notes: Vec<f64> = [root - 12.0, root, root + third, root + 7.0]
            .iter()
            .map(|m| 440.0 * 2f64.powf((m - 69.0) / 12.0))
            .collect();
        let phases: Vec<f64> = notes.iter().map(|_| rng.random_range(0.0..TAU)).collect();
        let end = (start + dur).min(len);
        for i in start..end {
            let t = i as f64 / sr;
            let pulse = 0.7 + 0.3 * (0.5 + 0.5 * (TAU * tempo * t).cos()).powi(4);
            let mut v = 0.0;
            for (f, p) in notes.iter().zip(&phases) {
                for k in 1..=6 {
                    v += ((k as f64) * (TAU * f * t + p)).sin() / (k as f64).powf(1.5);
                }
            }
            lp = 0.95 * lp + 0.05 * noise.sample(rng);
            out[i] = pulse * v + 3.0 * lp;
        }
        start = end;
    }
    out
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Scales `x` in place to the given RMS (no-op on silence).
pub(crate) fn set_rms(x: &mut [f64], target: f64) {
    let r = rms(x);
    if r > 0.0 {
        let g = target / r;
        x.iter_mut().for_each(|v| *v *= g);
    }
}
