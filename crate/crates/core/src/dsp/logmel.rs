use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;

use super::{
    AudioClip, BLOCK_HOP_SECONDS, BLOCK_SECONDS, FRAMES_PER_BLOCK, F_MAX, HOP, MEL_FLOOR, N_FFT, N_MELS,
    SAMPLE_RATE, WINDOW,
};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters, peak weight 1, with centers equally spaced on the mel
/// scale between `f_min` and `f_max`.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `n_mels x (n_fft / 2 + 1)`, row-major.
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    /// Left edge, center and right edge of each filter in Hz.
    pub edges: Vec<(f64, f64, f64)>,
}

impl MelFilterbank {
    pub fn new(n_fft: usize, sample_rate: u32, n_mels: usize, f_min: f64, f_max: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        let mut edges = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
            edges.push((left, center, right));
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                weights[m * n_bins + k] = up.min(down).max(0.0);
            }
        }
        MelFilterbank {
            weights,
            n_mels,
            n_bins,
            edges,
        }
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.1).collect()
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.row(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Log mel-bank energies of one analysis block.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMelBlock {
    /// `frames x N_MELS`, row-major.
    pub values: Vec<f32>,
    pub frames: usize,
    pub start_time: f64,
    pub duration: f64,
}

impl LogMelBlock {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.values[t * N_MELS..(t + 1) * N_MELS]
    }
}

/// Hamming-windowed STFT (704-sample window, 352 hop, 1024-point FFT) into
/// 64 mel energies, floor-clamped natural log.
#[derive(Clone)]
pub struct LogMelExtractor {
    window: Vec<f64>,
    filterbank: MelFilterbank,
    fft: Arc<dyn Fft<f64>>,
}

impl Default for LogMelExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl LogMelExtractor {
    pub fn new() -> Self {
        let window = (0..WINDOW)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (WINDOW - 1) as f64).cos())
            .collect();
        LogMelExtractor {
            window,
            filterbank: MelFilterbank::new(N_FFT, SAMPLE_RATE, N_MELS, 0.0, F_MAX),
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
        }
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Number of full frames in `len` samples.
    pub fn frame_count(len: usize) -> usize {
        if len < WINDOW {
            0
        } else {
            (len - WINDOW) / HOP + 1
        }
    }

    /// Log mel frames of `samples`, `frame_count x N_MELS` row-major.
    pub fn frames(&self, samples: &[f32]) -> Vec<f32> {
        let n_frames = Self::frame_count(samples.len());
        let mut out = Vec::with_capacity(n_frames * N_MELS);
        let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0; N_FFT / 2 + 1];
        let mut mel = vec![0.0; N_MELS];
        for f in 0..n_frames {
            let frame = &samples[f * HOP..f * HOP + WINDOW];
            for (i, c) in buf.iter_mut().enumerate() {
                *c = if i < WINDOW {
                    Complex::new(frame[i] as f64 * self.window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, &mut mel);
            out.extend(mel.iter().map(|&e| e.max(MEL_FLOOR).ln() as f32));
        }
        out
    }

    /// One-second blocks with a half-second hop; a trailing partial block is
    /// dropped.
    pub fn blocks(&self, clip: &AudioClip) -> Result<Vec<LogMelBlock>> {
        clip.validate()?;
        let sr = clip.sample_rate as f64;
        let block_len = (BLOCK_SECONDS * sr).round() as usize;
        let block_hop = (BLOCK_HOP_SECONDS * sr).round() as usize;
        let mut blocks = Vec::new();
        let mut start = 0;
        while start + block_len <= clip.samples.len() {
            let values = self.frames(&clip.samples[start..start + block_len]);
            debug_assert_eq!(values.len(), FRAMES_PER_BLOCK * N_MELS);
            blocks.push(LogMelBlock {
                values,
                frames: FRAMES_PER_BLOCK,
                start_time: start as f64 / sr,
                duration: BLOCK_SECONDS,
            });
            start += block_hop;
        }
        Ok(blocks)
    }
}

/// Log mel-bank block sequence of a clip.
pub fn stft_logmel(clip: &AudioClip) -> Result<Vec<LogMelBlock>> {
    LogMelExtractor::new().blocks(clip)
}
