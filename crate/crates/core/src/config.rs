//! Flat `key = value` run configuration. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Recognized keys, in documentation order.
pub const KEYS: &[&str] = &[
    "seed",
    "epochs",
    "batch_size",
    "lr",
    "lambda.a",
    "lambda.v",
    "lambda.av",
    "lambda.1 .. lambda.9",
    "val_fraction",
    "test_fraction",
    "max_steps",
    "dropout",
    "variant",
    "model",
    "manifest",
    "out",
    "checkpoint",
    "scenes",
    "scene_seconds",
    "ablation_seeds",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    /// Scene count for generated benchmarks.
    pub scenes: usize,
    pub scene_seconds: f64,
    pub ablation_seeds: Vec<u64>,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            manifest: None,
            out: PathBuf::from("out"),
            checkpoint: None,
            scenes: 60,
            scene_seconds: 10.0,
            ablation_seeds: vec![0, 1, 2, 3, 4],
            base_dir: PathBuf::from("."),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig {
            base_dir: base_dir.to_path_buf(),
            ..RunConfig::default()
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("configuration error: "))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn path(&self, v: &str) -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    /// Applies one setting; used for file lines and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "seed" => t.seed = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "lr" => t.lr = num(key, value)?,
            "lambda.a" => {
                let l = num(key, value)?;
                t.weights.lambda[..4].iter_mut().for_each(|x| *x = l);
            }
            "lambda.v" => t.weights.lambda[4] = num(key, value)?,
            "lambda.av" => {
                let l = num(key, value)?;
                t.weights.lambda[5..].iter_mut().for_each(|x| *x = l);
            }
            "val_fraction" => t.val_fraction = num(key, value)?,
            "test_fraction" => t.test_fraction = num(key, value)?,
            "max_steps" => t.max_steps = Some(num(key, value)?),
            "dropout" => t.model.dropout = num(key, value)?,
            "variant" => t.variant = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "model" => {
                let dropout = t.model.dropout;
                t.model = match value {
                    "default" => ModelConfig::default(),
                    "tiny" => ModelConfig::tiny(),
                    _ => return Err(Error::Config(format!("model: expected default or tiny, got {value:?}"))),
                };
                t.model.dropout = dropout;
            }
            "manifest" => self.manifest = Some(self.path(value)),
            "out" => self.out = self.path(value),
            "checkpoint" => self.checkpoint = Some(self.path(value)),
            "scenes" => self.scenes = num(key, value)?,
            "scene_seconds" => self.scene_seconds = num(key, value)?,
            "ablation_seeds" => {
                self.ablation_seeds = value
                    .split(',')
                    .map(|s| num("ablation_seeds", s.trim()))
                    .collect::<Result<_>>()?
            }
            _ => {
                if let Some(i) = key.strip_prefix("lambda.").and_then(|s| s.parse::<usize>().ok()) {
                    if (1..=9).contains(&i) {
                        t.weights.lambda[i - 1] = num(key, value)?;
                        return Ok(());
                    }
                }
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }
}
