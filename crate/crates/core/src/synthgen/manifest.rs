//! Scene manifest: one tab-separated row per scene listing its relative
//! audio, frame archive and annotation paths plus seed and duration.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dsp::{read_wav, write_wav, AudioClip};
use crate::error::{Error, Result};
use crate::evalkit::{read_annotations, write_annotations, EventAnnotation};

use super::{generate_scene, read_frames, write_frames, SceneSpec, VisualStream};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub audio: PathBuf,
    pub frames: PathBuf,
    pub annotation: PathBuf,
    pub seed: u64,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    /// Directory the relative paths resolve against.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Renders every scene and writes assets plus `manifest.txt` under `root`.
/// Output bytes depend only on the specs.
pub fn write_manifest(scenes: &[SceneSpec], root: &Path) -> Result<PathBuf> {
    create_dir(root)?;
    let mut text = String::new();
    for (i, spec) in scenes.iter().enumerate() {
        let scene = generate_scene(spec)?;
        let entry = ManifestEntry {
            audio: PathBuf::from(format!("audio/scene_{i:04}.wav")),
            frames: PathBuf::from(format!("frames/scene_{i:04}.avim")),
            annotation: PathBuf::from(format!("annotations/scene_{i:04}.txt")),
            seed: spec.seed,
            duration: spec.duration,
        };
        for dir in ["audio", "frames", "annotations"] {
            create_dir(&root.join(dir))?;
        }
        write_wav(&root.join(&entry.audio), &scene.audio)?;
        write_frames(&root.join(&entry.frames), &scene.visual)?;
        write_annotations(&root.join(&entry.annotation), &scene.events)?;
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.3}\n",
            entry.audio.display(),
            entry.frames.display(),
            entry.annotation.display(),
            entry.seed,
            entry.duration
        ));
    }
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

impl Manifest {
    /// Loads a manifest file, or `manifest.txt` inside a directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::format(&file, format!("line {}: expected 5 columns, found {}", n + 1, cols.len())));
            }
            let seed = cols[3]
                .parse()
                .map_err(|_| Error::format(&file, format!("line {}: bad seed {:?}", n + 1, cols[3])))?;
            let duration = cols[4]
                .parse()
                .map_err(|_| Error::format(&file, format!("line {}: bad duration {:?}", n + 1, cols[4])))?;
            entries.push(ManifestEntry {
                audio: cols[0].into(),
                frames: cols[1].into(),
                annotation: cols[2].into(),
                seed,
                duration,
            });
        }
        Ok(Manifest { root, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.root.join(relative)
    }

    pub fn load_scene(&self, i: usize) -> Result<(AudioClip, VisualStream, Vec<EventAnnotation>)> {
        let e = &self.entries[i];
        Ok((
            read_wav(&self.resolve(&e.audio))?,
            read_frames(&self.resolve(&e.frames))?,
            read_annotations(&self.resolve(&e.annotation))?,
        ))
    }
}
