//! The training loop: data order, batches, checkpoints, log, resume.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalReport};
use super::metrics::{loss_grad, LossValue, LossWeights};
use super::optim::{adam_step, AdamConfig, AdamState};
use crate::beamformer::{BeamformerParams, Prebeamformer, PREBEAM_DELAY};
use crate::nn::{self, ModelConfig, ModelWeights};
use crate::room::Dataset;
use crate::{Error, Result, BLOCK_SIZE, SAMPLE_RATE};

pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const LAST_OPTIMIZER: &str = "last.opt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const TRAIN_LOG: &str = "train_log.tsv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub loss: LossWeights,
    pub batch_size: usize,
    pub epochs: usize,
    /// Training crop; clips are cut to this length (rounded down to whole blocks).
    pub clip_seconds: f64,
    pub seed: u64,
    /// Halve the learning rate after this many epochs without a better
    /// validation score; 0 keeps it constant.
    pub plateau_patience: usize,
    /// Stop after this many optimizer steps in total.
    pub max_steps: Option<u64>,
    /// Stop at the first step boundary once this much training wall time has
    /// accumulated (resumed runs count earlier invocations).
    pub max_seconds: Option<f64>,
    /// Also write `last.*` every this many steps; 0 writes at epoch ends only.
    pub checkpoint_every: u64,
    pub beamformer: BeamformerParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: AdamConfig::default(),
            loss: LossWeights::default(),
            batch_size: 4,
            epochs: 20,
            clip_seconds: 4.0,
            seed: 0,
            plateau_patience: 3,
            max_steps: None,
            max_seconds: None,
            checkpoint_every: 0,
            beamformer: BeamformerParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.optimizer.lr > 0.0) || !(0.0..1.0).contains(&self.optimizer.beta1) || !(0.0..1.0).contains(&self.optimizer.beta2) {
            return bad("optimizer needs lr > 0 and betas in [0, 1)");
        }
        if !(self.optimizer.eps > 0.0) || !(self.optimizer.clip_norm >= 0.0) {
            return bad("optimizer eps must be > 0 and clip_norm >= 0");
        }
        if !(self.loss.si_sdr >= 0.0 && self.loss.l1 >= 0.0) {
            return bad("loss weights must be >= 0");
        }
        if self.crop_samples() <= PREBEAM_DELAY {
            return bad("clip_seconds is shorter than the prebeam delay");
        }
        self.beamformer.validate()
    }

    pub fn crop_samples(&self) -> usize {
        let n = (self.clip_seconds * SAMPLE_RATE as f64) as usize;
        n / BLOCK_SIZE * BLOCK_SIZE
    }
}

/// Where a run stands; stored next to the optimizer moments so a resumed
/// run continues with the exact same next step.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Progress {
    epoch: u64,
    /// Clips of the current epoch already consumed.
    position: u64,
    lr: f64,
    best: Option<f64>,
    stale_epochs: u64,
    /// Wall time spent training, summed over resumed invocations.
    elapsed: f64,
}

impl Progress {
    fn to_words(self) -> Vec<u64> {
        vec![
            self.epoch,
            self.position,
            self.lr.to_bits(),
            self.best.is_some() as u64,
            self.best.unwrap_or(0.0).to_bits(),
            self.stale_epochs,
            self.elapsed.to_bits(),
        ]
    }

    fn from_words(w: &[u64]) -> Result<Self> {
        if w.len() != 7 {
            return Err(Error::Checkpoint("optimizer state lacks training progress".into()));
        }
        Ok(Progress {
            epoch: w[0],
            position: w[1],
            lr: f64::from_bits(w[2]),
            best: (w[3] != 0).then(|| f64::from_bits(w[4])),
            stale_epochs: w[5],
            elapsed: f64::from_bits(w[6]),
        })
    }
}

/// What a call to [`train`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub steps: u64,
    pub epochs_completed: u64,
    /// Whether every configured epoch ran (false when a step or time limit hit first).
    pub finished: bool,
    pub best_val_si_sdri: Option<f64>,
    pub last_checkpoint: PathBuf,
    pub best_checkpoint: Option<PathBuf>,
    pub validations: Vec<(u64, EvalReport)>,
    /// Training wall time including earlier resumed invocations.
    pub elapsed_seconds: f64,
}

/// Clip order of epoch `epoch`.
pub fn epoch_order(seed: u64, epoch: u64, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Network input rows (flattened) for a mixture, cropped to `len` samples.
fn features(prebeam: &Prebeamformer, mixture: &crate::signal::MultichannelBuffer<f32>, len: usize) -> Result<Vec<f32>> {
    let f = prebeam.process_signal(&mixture.slice(0, len))?;
    let mut x = Vec::with_capacity(f.num_channels() * len);
    for ch in f.channels() {
        x.extend_from_slice(&ch[..len]);
    }
    Ok(x)
}

/// Loss and parameter gradient for one clip. The network output at `n`
/// is trained toward the groundtruth at `n - PREBEAM_DELAY`.
pub fn clip_gradient(
    weights: &ModelWeights<f32>,
    input: Vec<f32>,
    target: &[f32],
    loss_weights: LossWeights,
) -> Result<(LossValue, Vec<f32>)> {
    let len = target.len();
    let (g, out) = nn::forward(weights, input, len, true)?;
    let z = g.value(out.output);
    let (value, gz) = loss_grad(&z[PREBEAM_DELAY..], &target[..len - PREBEAM_DELAY], loss_weights)?;
    let mut grad = vec![0.0f32; len];
    grad[PREBEAM_DELAY..].copy_from_slice(&gz);
    let gw = g.backward(weights, out.output, grad)?;
    Ok((value, gw))
}

struct Log {
    file: std::fs::File,
}

impl Log {
    fn open(path: &Path, append: bool) -> Result<Self> {
        let mut file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if !append {
            writeln!(file, "step\tloss\tsi_sdr_term\tl1_term").map_err(|e| Error::io(path, e))?;
        }
        Ok(Log { file })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.file, "{s}").map_err(|e| Error::Io {
            path: TRAIN_LOG.into(),
            source: e,
        })
    }
}

/// Train `model` on `train_dir`, validating on `val_dir` after each epoch.
/// Writes `last.ckpt`/`last.opt`, `best.ckpt` and `train_log.tsv` into
/// `out_dir`. With `resume`, continues from `last.*` when present.
pub fn train(
    train_dir: impl AsRef<Path>,
    val_dir: Option<&Path>,
    out_dir: impl AsRef<Path>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    resume: bool,
) -> Result<TrainOutcome> {
    model.validate()?;
    cfg.validate()?;
    let data = Dataset::open(train_dir)?;
    let val = val_dir.map(Dataset::open).transpose()?;
    for d in std::iter::once(&data).chain(val.as_ref()) {
        if d.manifest().num_mics != model.mics {
            return Err(Error::Config(format!(
                "dataset {} has {} microphones, model expects {}",
                d.dir().display(),
                d.manifest().num_mics,
                model.mics
            )));
        }
    }
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let last_path = out_dir.join(LAST_CHECKPOINT);
    let opt_path = out_dir.join(LAST_OPTIMIZER);
    let best_path = out_dir.join(BEST_CHECKPOINT);
    let log_path = out_dir.join(TRAIN_LOG);

    let resuming = resume && last_path.exists() && opt_path.exists();
    let (mut weights, mut opt, mut progress) = if resuming {
        let w = ModelWeights::<f32>::load(&last_path)?;
        if w.config() != model {
            return Err(Error::Config(format!("{} was trained with a different model config", last_path.display())));
        }
        let (opt, extra) = AdamState::load(&opt_path, w.as_slice().len())?;
        (w, opt, Progress::from_words(&extra)?)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w = ModelWeights::<f32>::init(model, &mut rng)?;
        let n = w.as_slice().len();
        let progress = Progress {
            epoch: 0,
            position: 0,
            lr: cfg.optimizer.lr,
            best: None,
            stale_epochs: 0,
            elapsed: 0.0,
        };
        (w, AdamState::new(n), progress)
    };
    let mut log = Log::open(&log_path, resuming)?;

    let geometry = data.geometry()?;
    let mut prebeam = Prebeamformer::new(geometry, cfg.beamformer.clone(), 0.0, model.use_beamformers)?;
    let crop = cfg.crop_samples();
    let started = Instant::now();
    let base_elapsed = progress.elapsed;
    let clock = || base_elapsed + started.elapsed().as_secs_f64();
    let mut steps_this_run = 0u64;
    let mut validations = Vec::new();
    let mut grad_sum = vec![0.0f32; weights.as_slice().len()];

    let save_last = |w: &ModelWeights<f32>, opt: &AdamState<f32>, mut p: Progress| -> Result<()> {
        p.elapsed = clock();
        w.save(&last_path)?;
        opt.save(&opt_path, &p.to_words())
    };

    let out_of_budget = |opt: &AdamState<f32>, steps_this_run: u64| {
        cfg.max_steps.is_some_and(|m| opt.step >= m)
            || (steps_this_run > 0 && cfg.max_seconds.is_some_and(|s| clock() >= s))
    };

    let mut stopped = false;
    'epochs: while progress.epoch < cfg.epochs as u64 {
        let order = epoch_order(cfg.seed, progress.epoch, data.len());
        while (progress.position as usize) < order.len() {
            if out_of_budget(&opt, steps_this_run) {
                stopped = true;
                break 'epochs;
            }
            let start = progress.position as usize;
            let batch = &order[start..(start + cfg.batch_size).min(order.len())];
            grad_sum.iter_mut().for_each(|g| *g = 0.0);
            let (mut total, mut si, mut l1) = (0.0, 0.0, 0.0);
            let mut used = 0usize;
            for &i in batch {
                let clip = data.load(i)?;
                let len = crop.min(clip.mixture.len() / BLOCK_SIZE * BLOCK_SIZE);
                if len <= PREBEAM_DELAY {
                    return Err(Error::Input(format!("{} is too short to train on", data.meta(i).id)));
                }
                let target = &clip.target_dry[..len];
                if target[..len - PREBEAM_DELAY].iter().all(|v| *v == 0.0) {
                    // silent target: SI-SDR is undefined, nothing to learn from
                    continue;
                }
                used += 1;
                prebeam.set_theta(clip.theta_input)?;
                let x = features(&prebeam, &clip.mixture, len)?;
                let (value, g) = clip_gradient(&weights, x, target, cfg.loss)?;
                for (s, v) in grad_sum.iter_mut().zip(&g) {
                    *s += *v;
                }
                total += value.total;
                si += -cfg.loss.si_sdr * value.si_sdr;
                l1 += cfg.loss.l1 * value.l1;
            }
            progress.position += batch.len() as u64;
            if used == 0 {
                continue;
            }
            let nb = used as f32;
            grad_sum.iter_mut().for_each(|g| *g /= nb);
            let adam = AdamConfig {
                lr: progress.lr,
                ..cfg.optimizer
            };
            adam_step(weights.as_mut_slice(), &mut grad_sum, &mut opt, &adam)?;
            if weights.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::Internal(format!("non-finite parameter after step {}", opt.step)));
            }
            steps_this_run += 1;
            let nb = used as f64;
            log.line(&format!("{}\t{:.6}\t{:.6}\t{:.6}", opt.step, total / nb, si / nb, l1 / nb))?;
            if cfg.checkpoint_every > 0 && opt.step % cfg.checkpoint_every == 0 {
                save_last(&weights, &opt, progress)?;
            }
        }

        let epoch = progress.epoch + 1;
        progress.epoch = epoch;
        progress.position = 0;
        let score = match &val {
            Some(v) => {
                let report = evaluate(&weights, v, &cfg.beamformer)?;
                let s = report.mean_si_sdri();
                log.line(&format!(
                    "# epoch\t{epoch}\tval_si_sdri\t{s:.4}\tval_sdri\t{:.4}\tlr\t{:e}\telapsed_s\t{:.1}",
                    report.mean_sdri(),
                    progress.lr,
                    clock()
                ))?;
                validations.push((epoch, report));
                Some(s)
            }
            None => {
                log.line(&format!("# epoch\t{epoch}\tlr\t{:e}\telapsed_s\t{:.1}", progress.lr, clock()))?;
                None
            }
        };
        let improved = match (score, progress.best) {
            (Some(s), Some(b)) => s > b,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if improved {
            progress.best = score.or(progress.best);
            progress.stale_epochs = 0;
            weights.save(&best_path)?;
        } else {
            progress.stale_epochs += 1;
            if cfg.plateau_patience > 0 && progress.stale_epochs >= cfg.plateau_patience as u64 {
                progress.lr *= 0.5;
                progress.stale_epochs = 0;
            }
        }
        save_last(&weights, &opt, progress)?;
    }
    if stopped {
        save_last(&weights, &opt, progress)?;
    }
    Ok(TrainOutcome {
        steps: opt.step,
        epochs_completed: progress.epoch,
        finished: !stopped,
        best_val_si_sdri: progress.best,
        last_checkpoint: last_path,
        best_checkpoint: best_path.exists().then_some(best_path),
        validations,
        elapsed_seconds: clock(),
    })
}
