use std::path::Path;

use crate::error::{Error, Result};

use super::{SAMPLE_RATE, WINDOW};

#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let clip = AudioClip {
            samples,
            sample_rate,
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::InvalidArgument(format!(
                "sample rate {} Hz unsupported, expected {SAMPLE_RATE} Hz",
                self.sample_rate
            )));
        }
        if self.samples.len() < WINDOW {
            return Err(Error::InvalidArgument(format!(
                "clip of {} samples is shorter than one {WINDOW}-sample analysis window",
                self.samples.len()
            )));
        }
        if let Some(v) = self.samples.iter().find(|v| !(v.is_finite() && v.abs() <= 1.0)) {
            return Err(Error::InvalidArgument(format!("sample {v} outside [-1, 1]")));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Rounds a sample to the nearest 16-bit PCM level, so that writing and
/// re-reading it is lossless.
pub fn quantize_sample(x: f32) -> f32 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

/// Reads 16-bit signed PCM mono audio.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other),
    };
    let mut r = hound::WavReader::open(path).map_err(wrap)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit PCM mono, got {} channel(s), {} bits, {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(wrap)?;
    let clip = AudioClip {
        samples,
        sample_rate: spec.sample_rate,
    };
    clip.validate().map_err(|e| Error::format(path, e))?;
    Ok(clip)
}
