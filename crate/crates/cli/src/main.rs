//! `dirhear`: dataset generation, training, evaluation, file and stream
//! separation, benchmarking and architecture inspection.

mod commands;
mod stream;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dirhear::config::EngineConfig;

#[derive(Parser, Debug)]
#[command(name = "dirhear", version, about = "Streaming directional hearing engine")]
struct Cli {
    /// Engine configuration file (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset of mixture/groundtruth clips.
    GenData(GenDataArgs),
    /// Train a separator on a generated dataset.
    Train(TrainArgs),
    /// Score a checkpoint (or the MVDR beamformer alone) on a dataset.
    Eval(EvalArgs),
    /// Separate a multichannel WAV file.
    Separate(SeparateArgs),
    /// Separate interleaved float32 PCM from stdin to mono float32 on stdout.
    Stream(StreamArgs),
    /// Time the streaming engine per 8 ms block.
    Bench(BenchArgs),
    /// Print parameter count, MAC/s, receptive field and lookahead.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model preset: hybridbeam, hybridbeam-plus or toy.
    #[arg(long)]
    preset: Option<String>,
    /// Drop the three beamformer channels from the network input.
    #[arg(long)]
    no_beamformers: bool,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    /// Worker threads rendering clips; output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training dataset directory (defaults to paths.dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Validation dataset directory (defaults to paths.val_dataset).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Output directory for checkpoints and the log (defaults to paths.out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    clip_seconds: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Stop at the first step boundary after this many minutes.
    #[arg(long)]
    max_minutes: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from last.ckpt / last.opt in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint to score (defaults to paths.weights).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Dataset directory (defaults to paths.val_dataset, then paths.dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Score the online MVDR beamformer output instead of a network.
    #[arg(long)]
    mvdr: bool,
    /// Write per-clip scores and the summary as TSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeparateArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Look direction in degrees (wrapped to [-180, 180)).
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Run block by block through the streaming engine (default).
    #[arg(long, conflicts_with = "offline")]
    streaming: bool,
    /// Run one whole-signal pass.
    #[arg(long)]
    offline: bool,
    /// Keep the engine's 9.5 ms delay instead of trimming it.
    #[arg(long)]
    keep_delay: bool,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Initial look direction in degrees.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// File or FIFO carrying `theta <radians>` lines; each applies from the next block.
    #[arg(long)]
    control: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Checkpoint to time; without it a randomly initialized model of the
    /// configured preset is used (timing does not depend on weight values).
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Seconds of audio to process.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[command(flatten)]
    model: ModelArgs,
}

/// Failure with a chosen exit status.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn load_config(cli: &Cli) -> anyhow::Result<EngineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

fn apply_model_args(cfg: &mut EngineConfig, m: &ModelArgs) {
    if let Some(p) = &m.preset {
        cfg.model.preset = Some(p.clone());
    }
    if m.no_beamformers {
        cfg.model.use_beamformers = Some(false);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenData(a) => {
            cfg.validate()?;
            commands::gen_data(&cfg, &a.out, a.count, a.jobs)
        }
        Command::Train(a) => {
            apply_model_args(&mut cfg, &a.model);
            let t = &mut cfg.train;
            if let Some(v) = a.epochs {
                t.epochs = v;
            }
            if let Some(v) = a.batch_size {
                t.batch_size = v;
            }
            if let Some(v) = a.lr {
                t.optimizer.lr = v;
            }
            if let Some(v) = a.clip_seconds {
                t.clip_seconds = v;
            }
            if a.max_steps.is_some() {
                t.max_steps = a.max_steps;
            }
            if let Some(m) = a.max_minutes {
                t.max_seconds = Some(m * 60.0);
            }
            if let Some(v) = a.checkpoint_every {
                t.checkpoint_every = v;
            }
            cfg.validate()?;
            let data = a.data.or(cfg.paths.dataset.clone()).ok_or_else(|| anyhow::anyhow!("no training dataset: pass --data or set paths.dataset"))?;
            let val = a.val.or(cfg.paths.val_dataset.clone());
            let out = a.out.or(cfg.paths.out_dir.clone()).ok_or_else(|| anyhow::anyhow!("no output directory: pass --out or set paths.out_dir"))?;
            commands::train(&cfg, &data, val.as_deref(), &out, a.resume)
        }
        Command::Eval(a) => {
            cfg.validate()?;
            let data = a
                .data
                .or(cfg.paths.val_dataset.clone())
                .or(cfg.paths.dataset.clone())
                .ok_or_else(|| anyhow::anyhow!("no dataset: pass --data or set paths.val_dataset"))?;
            let weights = if a.mvdr { None } else { Some(weights_path(a.weights, &cfg)?) };
            commands::eval(&cfg, weights.as_deref(), &data, a.out.as_deref())
        }
        Command::Separate(a) => {
            if let Some(t) = a.theta {
                cfg.theta_deg = t;
            }
            cfg.validate()?;
            let weights = weights_path(a.weights, &cfg)?;
            commands::separate(&cfg, &weights, &a.input, &a.output, !a.offline, a.keep_delay)
        }
        Command::Stream(a) => {
            if let Some(t) = a.theta {
                cfg.theta_deg = t;
            }
            cfg.validate()?;
            let weights = weights_path(a.weights, &cfg)?;
            stream::run(&cfg, &weights, a.control.as_deref())
        }
        Command::Bench(a) => {
            apply_model_args(&mut cfg, &a.model);
            cfg.validate()?;
            let weights = a.weights.or(cfg.paths.weights.clone());
            commands::bench(&cfg, weights.as_deref(), a.duration)
        }
        Command::Info(a) => {
            apply_model_args(&mut cfg, &a.model);
            cfg.validate()?;
            commands::info(&cfg.model_config()?);
            Ok(())
        }
    }
}

fn weights_path(flag: Option<PathBuf>, cfg: &EngineConfig) -> anyhow::Result<PathBuf> {
    flag.or(cfg.paths.weights.clone()).ok_or_else(|| {
        Exit {
            code: 2,
            message: "no weights given: pass --weights or set paths.weights".into(),
        }
        .into()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<Exit>().map_or(1, |x| x.code);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("dirhear: error: {msg}");
            ExitCode::from(code)
        }
    }
}
