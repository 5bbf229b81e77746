//! Seeded synthetic musical scenes: an anchor who talks, sings or stays
//! quiet over background music, with applause, optional off-screen voices and
//! a mouth-region frame stream driven only by the anchor's own voice.

mod frames;
mod manifest;
mod render;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use frames::{
    quantize_pixel, read_frames, write_frames, ImageSequence, VisualStream, FRAMES_PER_SEQUENCE, FRAME_SIZE,
    VISUAL_FPS,
};
pub use manifest::{write_manifest, Manifest, ManifestEntry, MANIFEST_FILE};


use crate::class::EventClass;
use crate::dsp::{quantize_sample, AudioClip, BLOCK_HOP_SECONDS, BLOCK_SECONDS, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::evalkit::EventAnnotation;

/// RMS level of the anchor's voice over its active segments.
pub const TARGET_RMS: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub class: EventClass,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub duration: f64,
    pub segments: Vec<Segment>,
    /// Anchor-voice to background-music level ratio in dB.
    pub snr_db: f64,
    /// Mix off-screen voices into some non-vocal segments.
    pub distractor_voice: bool,
    /// Mix the background music bed.
    pub background: bool,
}

/// `n` random scene plans drawn from one master seed.
pub fn random_specs(n: usize, seed: u64, duration: f64) -> Vec<SceneSpec> {
    (0..n as u64).map(|i| SceneSpec::random(seed.wrapping_mul(100_003).wrapping_add(i), duration)).collect()
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("scene spec (seed {}): {m}", self.seed)));
        if !(self.duration.is_finite() && self.duration >= BLOCK_SECONDS) {
            return bad(format!("duration {} shorter than one block", self.duration));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if self.segments.is_empty() {
            return bad("empty segment plan".into());
        }
        let mut cursor = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.class.target_index().is_none() {
                return bad(format!("segment {i} has non-target class {}", s.class));
            }
            if !(s.start < s.end) {
                return bad(format!("segment {i} [{}, {}) is empty", s.start, s.end));
            }
            if s.start < cursor - 1e-9 {
                return bad(format!("segment {i} overlaps its predecessor"));
            }
            if s.start > cursor + 1e-9 {
                return bad(format!("gap before segment {i} at {cursor}"));
            }
            cursor = s.end;
        }
        if (cursor - self.duration).abs() > 1e-9 {
            return bad(format!("segments end at {cursor}, scene lasts {}", self.duration));
        }
        Ok(())
    }

    /// Random plan of 2-4 s segments whose interior boundaries fall a quarter
    /// second off the block grid, so every block has a clear majority class.
    pub fn random(seed: u64, duration: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7_e5ee_d000_0001);
        let mut segments = Vec::new();
        let mut cursor = 0.0;
        let mut prev: Option<EventClass> = None;
        while cursor < duration {
            let mut end = cursor + 0.5 * rng.random_range(4..=8) as f64;
            if segments.is_empty() {
                end -= 0.25;
            }
            if duration - end < 2.0 {
                end = duration;
            }
            let class = loop {
                let r: f64 = rng.random();
                let c = match r {
                    r if r < 0.2 => EventClass::Silence,
                    r if r < 0.5 => EventClass::Speech,
                    r if r < 0.8 => EventClass::Singing,
                    _ => EventClass::Others,
                };
                if Some(c) != prev {
                    break c;
                }
            };
            segments.push(Segment {
                class,
                start: cursor,
                end,
            });
            prev = Some(class);
            cursor = end;
        }
        SceneSpec {
            seed,
            duration,
            segments,
            snr_db: rng.random_range(-3.0..3.0),
            distractor_voice: rng.random_bool(0.8),
            background: true,
        }
    }

    pub fn events(&self) -> Vec<EventAnnotation> {
        let mut events: Vec<EventAnnotation> = Vec::new();
        for s in &self.segments {
            match events.last_mut() {
                Some(last) if last.label == s.class => last.offset = s.end,
                _ => events.push(EventAnnotation {
                    onset: s.start,
                    offset: s.end,
                    label: s.class,
                }),
            }
        }
        events
    }
}

/// Per-block training targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameLabels {
    pub start_time: f64,
    pub class: EventClass,
    /// Silence, speech, singing, others.
    pub audio: [f32; 4],
    /// Anchor vocalizing: speech or singing.
    pub visual: f32,
    pub av: [f32; 4],
}

impl FrameLabels {
    pub fn from_class(class: EventClass, start_time: f64) -> Self {
        let mut audio = [0.0; 4];
        if let Some(i) = class.target_index() {
            audio[i] = 1.0;
        }
        FrameLabels {
            start_time,
            class,
            audio,
            visual: if class.is_vocal() { 1.0 } else { 0.0 },
            av: audio,
        }
    }
}

/// Number of one-second blocks (half-second hop) in `duration` seconds.
pub fn block_count(duration: f64) -> usize {
    if duration + 1e-9 < BLOCK_SECONDS {
        0
    } else {
        ((duration - BLOCK_SECONDS) / BLOCK_HOP_SECONDS + 1e-9).floor() as usize + 1
    }
}

/// Class with the largest time coverage inside `[t0, t1)`; ties go to the
/// earlier class in target order, uncovered time counts as silence.
pub fn majority_class(events: &[EventAnnotation], t0: f64, t1: f64) -> EventClass {
    let mut cover = [0.0f64; 4];
    for e in events {
        let overlap = e.offset.min(t1) - e.onset.max(t0);
        if overlap > 0.0 {
            if let Some(i) = e.label.target_index() {
                cover[i] += overlap;
            }
        }
    }
    let covered: f64 = cover.iter().sum();
    cover[0] += (t1 - t0 - covered).max(0.0);
    let mut best = 0;
    for i in 1..4 {
        if cover[i] > cover[best] + 1e-9 {
            best = i;
        }
    }
    EventClass::TARGETS[best]
}

/// Block-level targets by majority time coverage.
pub fn block_labels(events: &[EventAnnotation], duration: f64) -> Vec<FrameLabels> {
    (0..block_count(duration))
        .map(|b| {
            let t0 = b as f64 * BLOCK_HOP_SECONDS;
            FrameLabels::from_class(majority_class(events, t0, t0 + BLOCK_SECONDS), t0)
        })
        .collect()
}

/// A rendered scene plus the generator-side ground truth.
#[derive(Clone, Debug)]
pub struct Scene {
    pub spec: SceneSpec,
    pub audio: AudioClip,
    pub visual: VisualStream,
    pub labels: Vec<FrameLabels>,
    pub events: Vec<EventAnnotation>,
    /// Mean anchor vocal envelope per video frame.
    pub vocal_envelope: Vec<f32>,
    /// Mouth ellipse height in pixels per video frame.
    pub mouth_height: Vec<f32>,
    /// Whether an off-screen voice sounds during each video frame.
    pub distractor_active: Vec<bool>,
}

const MOUTH_MAX_HEIGHT: f64 = 10.0;
const MOUTH_CENTER: (f64, f64) = (16.0, 21.0);
const MOUTH_HALF_WIDTH: f64 = 7.0;
const FACE_LEVEL: f64 = 0.62;

fn render_face<R: Rng>(mouth_height: f64, rng: &mut R, noise: &Normal<f64>, out: &mut [f32]) {
    let gain = rng.random_range(0.95..1.05);
    let ay = mouth_height / 2.0;
    for y in 0..FRAME_SIZE {
        for x in 0..FRAME_SIZE {
            let mut v = FACE_LEVEL;
            for (ex, ey) in [(10.0, 11.0), (22.0, 11.0)] {
                if (x as f64 + 0.5 - ex).powi(2) + (y as f64 + 0.5 - ey).powi(2) <= 4.0 {
                    v = 0.2;
                }
            }
            if y as f64 + 0.5 > MOUTH_CENTER.1 - 0.5
                && (y as f64 + 0.5) < MOUTH_CENTER.1 + 0.5
                && (x as f64 + 0.5 - MOUTH_CENTER.0).abs() < MOUTH_HALF_WIDTH
            {
                v = 0.45;
            }
            if ay > 0.0 {
                // 4x4 supersampled ellipse coverage
                let mut inside = 0;
                for sy in 0..4 {
                    for sx in 0..4 {
                        let px = x as f64 + (sx as f64 + 0.5) / 4.0 - MOUTH_CENTER.0;
                        let py = y as f64 + (sy as f64 + 0.5) / 4.0 - MOUTH_CENTER.1;
                        if (px / MOUTH_HALF_WIDTH).powi(2) + (py / ay).powi(2) <= 1.0 {
                            inside += 1;
                        }
                    }
                }
                let cover = inside as f64 / 16.0;
                v = v * (1.0 - cover) + 0.08 * cover;
            }
            out[y * FRAME_SIZE + x] = quantize_pixel((v * gain + noise.sample(rng)) as f32);
        }
    }
}

/// Renders audio, frames and labels for a validated spec. Identical specs give
/// bit-identical output.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let sr = SAMPLE_RATE as f64;
    let n = (spec.duration * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut anchor = vec![0.0f64; n];
    let mut envelope = vec![0.0f64; n];
    let mut crowd = vec![0.0f64; n];
    let mut distractor = vec![0.0f64; n];
    for seg in &spec.segments {
        let s0 = (seg.start * sr).round() as usize;
        let s1 = ((seg.end * sr).round() as usize).min(n);
        let mut seg_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let with_distractor = spec.distractor_voice && rng.random_bool(0.6);
        let distractor_seed: u64 = rng.random();
        match seg.class {
            EventClass::Speech | EventClass::Singing => {
                let mut voice = if seg.class == EventClass::Speech {
                    render::speech(s1 - s0, sr, &mut seg_rng)
                } else {
                    render::singing(s1 - s0, sr, &mut seg_rng)
                };
                render::set_rms(&mut voice.samples, TARGET_RMS * seg_rng.random_range(0.8..1.2));
                anchor[s0..s1].copy_from_slice(&voice.samples);
                envelope[s0..s1].copy_from_slice(&voice.envelope);
            }
            EventClass::Others => {
                let mut clap = render::applause(s1 - s0, sr, &mut seg_rng);
                render::set_rms(&mut clap, TARGET_RMS * seg_rng.random_range(0.5..1.0));
                crowd[s0..s1].copy_from_slice(&clap);
            }
            _ => {}
        }
        if with_distractor && !seg.class.is_vocal() {
            let margin = (0.25 * sr) as usize;
            if s1 > s0 + 2 * margin {
                let (d0, d1) = (s0 + margin, s1 - margin);
                let mut d_rng = ChaCha8Rng::seed_from_u64(distractor_seed);
                let mut voice = if d_rng.random_bool(0.5) {
                    render::speech(d1 - d0, sr, &mut d_rng)
                } else {
                    render::singing(d1 - d0, sr, &mut d_rng)
                };
                render::set_rms(&mut voice.samples, TARGET_RMS * d_rng.random_range(0.6..1.0));
                distractor[d0..d1].copy_from_slice(&voice.samples);
            }
        }
    }
    let music_seed: u64 = rng.random();
    let mut mix: Vec<f64> = (0..n).map(|i| anchor[i] + crowd[i] + distractor[i]).collect();
    if spec.background {
        let mut bed = render::music(n, sr, &mut ChaCha8Rng::seed_from_u64(music_seed));
        render::set_rms(&mut bed, TARGET_RMS * 10f64.powf(-spec.snr_db / 20.0));
        mix.iter_mut().zip(&bed).for_each(|(m, b)| *m += b);
    }
    let peak = mix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.95 {
        let g = 0.95 / peak;
        mix.iter_mut().for_each(|v| *v *= g);
    }
    let samples: Vec<f32> = mix.iter().map(|&v| quantize_sample(v as f32)).collect();

    let n_frames = (spec.duration * VISUAL_FPS as f64 + 1e-9).floor() as usize;
    let spf = sr / VISUAL_FPS as f64;
    let mut frame_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut frames = vec![0.0f32; n_frames * FRAME_SIZE * FRAME_SIZE];
    let mut vocal_envelope = Vec::with_capacity(n_frames);
    let mut mouth_height = Vec::with_capacity(n_frames);
    let mut distractor_active = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let a = (f as f64 * spf).round() as usize;
        let b = (((f + 1) as f64 * spf).round() as usize).min(n);
        let env = envelope[a..b].iter().sum::<f64>() / (b - a).max(1) as f64;
        let open = env.clamp(0.0, 1.0);
        let height = MOUTH_MAX_HEIGHT * open;
        render_face(
            height,
            &mut frame_rng,
            &noise,
            &mut frames[f * FRAME_SIZE * FRAME_SIZE..(f + 1) * FRAME_SIZE * FRAME_SIZE],
        );
        vocal_envelope.push(env as f32);
        mouth_height.push(height as f32);
        distractor_active.push(distractor[a..b].iter().any(|&v| v != 0.0));
    }

    let events = spec.events();
    Ok(Scene {
        spec: spec.clone(),
        audio: AudioClip {
            samples,
            sample_rate: SAMPLE_RATE,
        },
        visual: VisualStream {
            width: FRAME_SIZE,
            height: FRAME_SIZE,
            fps: VISUAL_FPS,
            start_time: 0.0,
            frames,
        },
        labels: block_labels(&events, spec.duration),
        events,
        vocal_envelope,
        mouth_height,
        distractor_active,
    })
}
