//! Command implementations behind the `rbd` binary.

pub mod report;

use std::fs;
use std::io::{BufWriter, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use rbd_core::config::RunConfig;
use rbd_core::dataset::{generate_dataset, load_dataset, save_dataset, split_dataset, GenerationConfig};
use rbd_core::nn::{evaluate, load_model, param_count, save_model, train, AdamParams, ModelConfig, TrainConfig};
use rbd_core::pipeline::{run_stream, score_tracks, Mode, StreamConfig, StreamRecord};
use rbd_core::signature::{SignatureProfile, RAW_DOPPLER_BINS};
use rbd_core::sim::Scene;
use rbd_core::waveform::Quantity;
use rbd_core::BehaviorClass;

pub use report::EvalReport;

#[derive(Debug, Parser)]
#[command(name = "rbd", version, about = "Multi-person behavior detection with a simulated FMCW radar")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "RBD_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labeled single-person scenes and write an RBDS dataset.
    Generate(GenerateArgs),
    /// Train the classifier on a dataset and write an RBNN model.
    Train(TrainArgs),
    /// Evaluate a model on a dataset; writes a CSV report next to the model.
    Eval(EvalArgs),
    /// Run a scene through the streaming pipeline, emitting JSON lines.
    Stream(StreamArgs),
    /// Write one dataset pattern as a PGM image.
    ExportPattern(ExportArgs),
    /// Print the derived waveform parameters.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Run configuration (key = value file).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Samples per class.
    #[arg(long, default_value_t = 600, conflicts_with = "counts")]
    pub count: usize,
    /// Six comma-separated per-class counts, in label order.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Run configuration supplying `model.*` keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Report path; defaults to the model path with an `.eval.csv` suffix.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Scene file (key = value).
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Send records to this `host:port` instead of stdout.
    #[arg(long)]
    pub tcp: Option<String>,
    /// Override the scene duration, s.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub as_fast_as_possible: bool,
    /// Run the stages in one thread instead of three.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs one command. Results go to `out`, progress and summaries to `log`.
pub fn run(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a, cli.seed, out),
        Command::Train(a) => train_cmd(a, cli.seed, out),
        Command::Eval(a) => eval(a, out),
        Command::Stream(a) => stream(a, out, log),
        Command::ExportPattern(a) => export(a),
        Command::Info(a) => info(a, out),
    }
}

fn read_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_kv_str(&text).with_context(|| format!("configuration error in {}", p.display()))
        }
    }
}

/// `<path>.<suffix>` alongside `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn generate(a: GenerateArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let cfg = read_config(a.config.as_deref())?;
    let counts: [usize; BehaviorClass::COUNT] = match a.counts {
        Some(v) => v.try_into().map_err(|v: Vec<usize>| anyhow::anyhow!("--counts needs 6 values, got {}", v.len()))?,
        None => [a.count; BehaviorClass::COUNT],
    };
    let gen = GenerationConfig {
        waveform: cfg.waveform,
        cfar: cfg.cfar,
        tracker: cfg.tracker,
        profile: cfg.profile,
        ..GenerationConfig::default()
    };
    let start = Instant::now();
    let dataset = generate_dataset(&counts, &gen, seed)?;
    save_dataset(&dataset, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    let manifest = sibling(&a.output, ".manifest.jsonl");
    fs::write(&manifest, dataset.manifest()).with_context(|| format!("writing {}", manifest.display()))?;
    for (b, n) in BehaviorClass::ALL.iter().zip(dataset.class_counts()) {
        writeln!(out, "{:<18} {n:>6}", b.name())?;
    }
    writeln!(
        out,
        "{} samples ({}x{}) in {:.1} s -> {}",
        dataset.len(),
        dataset.profile.depth,
        dataset.profile.width,
        start.elapsed().as_secs_f64(),
        a.output.display()
    )?;
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let base = read_config(a.config.as_deref())?;
    let model_cfg = ModelConfig { input_height: dataset.profile.depth, input_width: dataset.profile.width, ..base.model };
    model_cfg.check().context("model does not fit the dataset's patterns")?;
    let (train_set, val_set) = split_dataset(&dataset, a.val_fraction, seed)?;
    writeln!(out, "{} training / {} validation samples, {} parameters", train_set.len(), val_set.len(), param_count(&model_cfg)?)?;
    writeln!(out, "{:>5} {:>12} {:>12} {:>9}", "epoch", "train loss", "val loss", "val acc")?;
    let opts = TrainConfig { epochs: a.epochs, batch_size: a.batch, adam: AdamParams { lr: a.lr, ..AdamParams::default() }, seed };
    let mut io_err = None;
    let (model, _) = train::<f32, _>(&model_cfg, &train_set.samples, &val_set.samples, &opts, |e| {
        let r = writeln!(
            out,
            "{:>5} {:>12.5} {:>12.5} {:>8.2}%",
            e.epoch,
            e.train_loss,
            e.val_loss.unwrap_or(f64::NAN),
            100.0 * e.val_accuracy.unwrap_or(f64::NAN)
        );
        if let Err(e) = r {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    save_model(&model, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    writeln!(out, "model -> {}", a.output.display())?;
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let dataset = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let mc = model.config();
    ensure!(
        (mc.input_height, mc.input_width) == (dataset.profile.depth, dataset.profile.width),
        "profile mismatch: model takes {}x{} patterns, dataset has {}x{}",
        mc.input_height,
        mc.input_width,
        dataset.profile.depth,
        dataset.profile.width
    );
    ensure!(mc.num_classes == BehaviorClass::COUNT, "model has {} classes, expected {}", mc.num_classes, BehaviorClass::COUNT);
    let e = evaluate(&model, &dataset.samples, 64)?;
    let truth: Vec<usize> = dataset.samples.iter().map(|s| s.label.label() as usize).collect();
    let report = EvalReport::from_labels(&truth, &e.predictions);
    write!(out, "{}", report.to_table())?;
    let csv_path = a.csv.unwrap_or_else(|| sibling(&a.model, ".eval.csv"));
    let file = fs::File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    report.write_csv(file)?;
    writeln!(out, "report -> {}", csv_path.display())?;
    Ok(())
}

fn stream(a: StreamArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.scene).with_context(|| format!("reading {}", a.scene.display()))?;
    let mut scene = Scene::from_kv_str(&text).with_context(|| format!("scene error in {}", a.scene.display()))?;
    if let Some(d) = a.duration {
        scene.duration = d;
    }
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let cfg = match a.config.as_deref() {
        Some(p) => read_config(Some(p))?,
        None => {
            // Size the profile from the model.
            let mc = model.config();
            let mut cfg = RunConfig::default();
            if mc.input_height > 0 && RAW_DOPPLER_BINS % mc.input_height == 0 {
                cfg.profile = SignatureProfile {
                    depth: mc.input_height,
                    width: mc.input_width,
                    fold: RAW_DOPPLER_BINS / mc.input_height,
                    name: "model".into(),
                    ..cfg.profile
                };
            }
            cfg
        }
    };
    let derived = cfg.check().or_else(|_| rbd_core::derive_params(&cfg.waveform))?;
    let stream_cfg = StreamConfig {
        waveform: cfg.waveform,
        cfar: cfg.cfar,
        tracker: cfg.tracker,
        profile: cfg.profile.clone(),
        paced: !a.as_fast_as_possible,
        mode: if a.sequential { Mode::Sequential } else { Mode::Staged },
    };
    let mut sink: Box<dyn Write> = match &a.tcp {
        Some(addr) => Box::new(BufWriter::new(TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?)),
        None => Box::new(BufWriter::new(out)),
    };
    let mut records = Vec::new();
    let stats = run_stream(&scene, &model, &stream_cfg, |r| {
        writeln!(sink, "{}", r.to_json())?;
        if matches!(r, StreamRecord::Prediction { .. }) {
            sink.flush()?;
        }
        records.push(r.clone());
        Ok(())
    })?;
    sink.flush()?;
    drop(sink);
    writeln!(
        log,
        "{} frames, {} points, {} predictions; per frame: processing {:.2} ms mean, {:.2} ms max; simulation {:.2} ms mean",
        stats.frames,
        stats.points,
        stats.predictions,
        stats.mean_latency.as_secs_f64() * 1e3,
        stats.max_latency.as_secs_f64() * 1e3,
        stats.mean_sim.as_secs_f64() * 1e3
    )?;
    for s in score_tracks(&scene, &derived, cfg.profile.width, &records) {
        writeln!(
            log,
            "track {}: actor {} ({}), {} predictions, {:.1}% correct",
            s.track_id,
            s.actor,
            scene.actors[s.actor].behavior().name(),
            s.predictions,
            100.0 * s.accuracy()
        )?;
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let dataset = load_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let Some(sample) = dataset.samples.get(a.index) else {
        bail!("index {} out of range: dataset has {} samples", a.index, dataset.len());
    };
    fs::write(&a.output, sample.pattern.to_pgm()).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn info(a: InfoArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = read_config(a.config.as_deref())?;
    let derived = cfg.check()?;
    for q in Quantity::ALL {
        writeln!(out, "{:<28} {}", q.name(), q.of(&derived))?;
    }
    writeln!(out, "{:<28} {} ({}x{}, {} bins folded by {})", "signature profile", cfg.profile.name, cfg.profile.depth, cfg.profile.width, RAW_DOPPLER_BINS, cfg.profile.fold)?;
    writeln!(out, "{:<28} {}", "trainable parameters", param_count(&cfg.model)?)?;
    Ok(())
}
