//! Binary parameter container.
//!
//! Layout (little-endian): magic `AVVD`, `u16` format version, `u32` entry
//! count, then per entry: `u32` name length, UTF-8 name bytes, `u32` rank,
//! `rank` x `u32` extents, and the values as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::{Real, Tensor};

pub const MAGIC: &[u8; 4] = b"AVVD";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<CheckpointEntry>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], values: Vec<f32>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::shape(
                "checkpoint entry",
                format!("{shape:?}"),
                format!("{} values for {name}", values.len()),
            ));
        }
        self.entries.push(CheckpointEntry {
            name,
            shape: shape.to_vec(),
            values,
        });
        Ok(())
    }

    pub fn push_tensor<F: Real>(&mut self, name: impl Into<String>, t: &Tensor<F>) -> Result<()> {
        let values = t.data().iter().map(|v| v.as_f64() as f32).collect();
        self.push(name, t.shape(), values)
    }

    pub fn get(&self, name: &str) -> Option<&CheckpointEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&CheckpointEntry> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no entry {name:?}")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for e in &self.entries {
            w.write_u32::<LittleEndian>(e.name.len() as u32)?;
            w.write_all(e.name.as_bytes())?;
            w.write_u32::<LittleEndian>(e.shape.len() as u32)?;
            for &d in &e.shape {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in &e.values {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let io = |e: std::io::Error| e.to_string();
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(format!("bad magic {magic:?}, expected AVVD"));
        }
        let version = r.read_u16::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let count = r.read_u32::<LittleEndian>().map_err(io)?;
        let mut entries = Vec::with_capacity(count.min(4096) as usize);
        for _ in 0..count {
            let len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(io)?;
            let name = String::from_utf8(name).map_err(|e| e.to_string())?;
            let rank = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let shape = (0..rank)
                .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(io)?;
            let n: usize = shape.iter().product();
            let mut values = vec![0f32; n];
            r.read_f32_into::<LittleEndian>(&mut values).map_err(io)?;
            entries.push(CheckpointEntry { name, shape, values });
        }
        Ok(Checkpoint { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|m| Error::format(path, m))
    }
}
