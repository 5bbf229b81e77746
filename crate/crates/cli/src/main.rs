use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use avvad::config::RunConfig;
use avvad::dsp::{read_wav, LogMelExtractor};
use avvad::evalkit::{event_metrics, vocal_reference, write_annotations, MetricsReport, DEFAULT_COLLAR};
use avvad::model::Variant;
use avvad::synthgen::{random_specs, read_frames, write_manifest};
use avvad::training::{
    ablation_report, ablation_table, export_embeddings, held_out, infer_scene, load_manifest, load_model, prepare_scene, sweep,
    sweep_report, train, write_loss_log, SceneData,
};

#[derive(Parser)]
#[command(name = "avvad", version, about = "Audio-visual vocal activity detection")]
struct Cli {
    /// Run configuration (flat `key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set epochs=5`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene set with manifest
    Gen {
        /// Number of scenes
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        seconds: Option<f64>,
    },
    /// Train a model; writes checkpoint, loss log and held-out report
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a checkpoint against every scene of a manifest
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Detect events in one audio/frames pair, or in every scene of a manifest
    Infer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// 16 kHz mono WAV
        #[arg(long, requires = "frames", conflicts_with = "manifest")]
        audio: Option<PathBuf>,
        /// Frame file matching `--audio`
        #[arg(long, requires = "audio")]
        frames: Option<PathBuf>,
    },
    /// Loss-weight sweep over the six grouped settings
    Sweep {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train every variant for each ablation seed
    Ablate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated seeds
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Dump per-block embeddings and attention weights
    Export {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {o:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    match flag.clone().or_else(|| cfg.manifest.clone()) {
        Some(p) => Ok(p),
        None => bail!("no manifest given (use --manifest or `manifest = ...` in the config)"),
    }
}

fn checkpoint_path(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.checkpoint.clone())
        .unwrap_or_else(|| cfg.out.join("model.ckpt"))
}

fn scenes(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<Vec<SceneData>> {
    let path = manifest_path(flag, cfg)?;
    let scenes = load_manifest(&path)?;
    if scenes.is_empty() {
        bail!("manifest {} lists no scenes", path.display());
    }
    info!("{} scenes from {}", scenes.len(), path.display());
    Ok(scenes)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn report_for(scenes: &[SceneData], detected: &[Vec<avvad::evalkit::EventAnnotation>], variant: Variant) -> Result<MetricsReport> {
    let mut total = MetricsReport::default();
    for (s, d) in scenes.iter().zip(detected) {
        let r = match variant {
            Variant::VisualOnly => vocal_reference(&s.events),
            _ => s.events.clone(),
        };
        total.merge(&event_metrics(&r, d, DEFAULT_COLLAR)?);
    }
    Ok(total)
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        let mut msg = String::new();
        for cause in e.chain().map(|c| c.to_string()) {
            if !msg.ends_with(&cause) {
                if !msg.is_empty() {
                    msg.push_str(": ");
                }
                msg.push_str(&cause);
            }
        }
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = run_config(&cli)?;
    match &cli.command {
        Command::Gen { scenes, seconds } => {
            let n = scenes.unwrap_or(cfg.scenes);
            let d = seconds.unwrap_or(cfg.scene_seconds);
            if !(d.is_finite() && d >= 1.0) {
                bail!("scene length must be at least 1 s, got {d}");
            }
            let path = write_manifest(&random_specs(n, cfg.train.seed, d), &cfg.out)?;
            println!("{n} scenes -> {}", path.display());
        }
        Command::Train { manifest } => {
            let data = scenes(manifest, &cfg)?;
            let outcome = train(&data, &cfg.train)?;
            let out = out_dir(&cfg)?;
            let ck = out.join("model.ckpt");
            outcome.checkpoint.save(&ck)?;
            write_loss_log(&out.join("loss.tsv"), &outcome.losses)?;
            let mut val = String::from("epoch\tF\tER\n");
            for (e, r) in &outcome.validation {
                val.push_str(&format!("{e}\t{:.2}\t{:.4}\n", r.f_score(), r.error_rate()));
            }
            write(&out.join("validation.tsv"), &val)?;
            let held: Vec<SceneData> = held_out(&outcome.splits).iter().map(|&i| data[i].clone()).collect();
            let report = avvad::training::evaluate(&outcome.net, &outcome.norm, &held, cfg.train.variant)?;
            write(&out.join("report.tsv"), &report.to_tsv())?;
            println!("best epoch {}, {} steps\n{report}", outcome.best_epoch, outcome.steps);
            println!("checkpoint -> {}", ck.display());
        }
        Command::Eval { checkpoint, manifest } => {
            let (net, norm, variant) = load_model(&checkpoint_path(checkpoint, &cfg))?;
            let data = scenes(manifest, &cfg)?;
            let report = avvad::training::evaluate(&net, &norm, &data, variant)?;
            write(&out_dir(&cfg)?.join("eval.tsv"), &report.to_tsv())?;
            println!("{report}");
        }
        Command::Infer {
            checkpoint,
            audio: Some(audio),
            frames: Some(frames),
            ..
        } => {
            let (net, norm, variant) = load_model(&checkpoint_path(checkpoint, &cfg))?;
            let clip = read_wav(audio)?;
            let stream = read_frames(frames)?;
            let scene = prepare_scene(0, &clip, &stream, &[], &LogMelExtractor::new())?;
            let events = infer_scene(&net, &norm, &scene, variant)?;
            let path = out_dir(&cfg)?.join("events.txt");
            write_annotations(&path, &events)?;
            for e in &events {
                println!("{:.3}\t{:.3}\t{}", e.onset, e.offset, e.label);
            }
            println!("events -> {}", path.display());
        }
        Command::Infer { checkpoint, manifest, .. } => {
            let (net, norm, variant) = load_model(&checkpoint_path(checkpoint, &cfg))?;
            let data = scenes(manifest, &cfg)?;
            let dir = out_dir(&cfg)?.join("events");
            fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let mut detected = Vec::with_capacity(data.len());
            for s in &data {
                let events = infer_scene(&net, &norm, s, variant)?;
                write_annotations(&dir.join(format!("scene_{:04}.txt", s.id)), &events)?;
                detected.push(events);
            }
            println!("{}", report_for(&data, &detected, variant)?);
            println!("events -> {}", dir.display());
        }
        Command::Sweep { manifest } => {
            let data = scenes(manifest, &cfg)?;
            let rows = sweep(&data, &cfg.train)?;
            let text = sweep_report(&rows);
            write(&out_dir(&cfg)?.join("sweep.tsv"), &text)?;
            print!("{text}");
        }
        Command::Ablate { manifest, seeds } => {
            let data = scenes(manifest, &cfg)?;
            let seeds: Vec<u64> = match seeds {
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim().parse().with_context(|| format!("bad seed {x:?}")))
                    .collect::<Result<_>>()?,
                None => cfg.ablation_seeds.clone(),
            };
            let results = ablation_table(&data, &cfg.train, &seeds)?;
            let text = ablation_report(&results);
            write(&out_dir(&cfg)?.join("ablation.tsv"), &text)?;
            print!("{text}");
        }
        Command::Export { checkpoint, manifest } => {
            let (net, norm, _) = load_model(&checkpoint_path(checkpoint, &cfg))?;
            let data = scenes(manifest, &cfg)?;
            let path = out_dir(&cfg)?.join("embeddings.tsv");
            let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            let rows = export_embeddings(&net, &norm, &data, std::io::BufWriter::new(file))?;
            println!("{rows} rows -> {}", path.display());
        }
    }
    Ok(())
}
