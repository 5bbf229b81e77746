//! Grayscale frame streams and the `AVIM` frame archive.
//!
//! Archive layout (little-endian): magic `AVIM`, `u16` width, `u16` height,
//! `u32` frame count, then `count * height * width` bytes, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const FRAME_SIZE: usize = 32;
pub const VISUAL_FPS: u32 = 8;
pub const FRAMES_PER_SEQUENCE: usize = 8;

/// Continuous stream of frames at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualStream {
    pub width: usize,
    pub height: usize,
    pub fps: u32,
    pub start_time: f64,
    /// `count x height x width`, values in `[0, 1]`.
    pub frames: Vec<f32>,
}

/// Fixed-length run of frames covering one analysis block.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSequence {
    /// `FRAMES_PER_SEQUENCE x height x width`.
    pub frames: Vec<f32>,
    pub width: usize,
    pub height: usize,
    pub start_time: f64,
}

impl VisualStream {
    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    pub fn frame_count(&self) -> usize {
        if self.frame_len() == 0 {
            0
        } else {
            self.frames.len() / self.frame_len()
        }
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let n = self.frame_len();
        &self.frames[i * n..(i + 1) * n]
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.frame_count() as f64 / self.fps as f64
    }

    pub fn sequence(&self, first: usize) -> Option<ImageSequence> {
        if first + FRAMES_PER_SEQUENCE > self.frame_count() {
            return None;
        }
        let n = self.frame_len();
        Some(ImageSequence {
            frames: self.frames[first * n..(first + FRAMES_PER_SEQUENCE) * n].to_vec(),
            width: self.width,
            height: self.height,
            start_time: self.start_time + first as f64 / self.fps as f64,
        })
    }
}

/// Rounds a pixel to the nearest 8-bit level.
pub fn quantize_pixel(v: f32) -> f32 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

pub fn write_frames(path: &Path, stream: &VisualStream) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(b"AVIM")?;
        w.write_u16::<LittleEndian>(stream.width as u16)?;
        w.write_u16::<LittleEndian>(stream.height as u16)?;
        w.write_u32::<LittleEndian>(stream.frame_count() as u32)?;
        let bytes: Vec<u8> = stream
            .frames
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)?;
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

/// Reads a frame archive as a stream starting at `t = 0`.
pub fn read_frames(path: &Path) -> Result<VisualStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != b"AVIM" {
        return Err(Error::format(path, "not an AVIM frame archive"));
    }
    let width = r.read_u16::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
    let height = r.read_u16::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
    let count = r.read_u32::<LittleEndian>().map_err(|e| Error::io(path, e))? as usize;
    let mut bytes = vec![0u8; width * height * count];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::format(path, format!("truncated pixel data: {e}")))?;
    Ok(VisualStream {
        width,
        height,
        fps: VISUAL_FPS,
        start_time: 0.0,
        frames: bytes.into_iter().map(|b| b as f32 / 255.0).collect(),
    })
}
