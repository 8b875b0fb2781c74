//! SI-SDRi / SDRi over a dataset.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{sdr, si_sdr};
use crate::beamformer::{BeamformerParams, Prebeamformer, PREBEAM_DELAY};
use crate::nn::{self, ModelWeights};
use crate::room::Dataset;
use crate::signal::MultichannelBuffer;
use crate::{Error, Result};

/// Row of the MVDR output in the prebeam stack.
const MVDR_ROW: usize = 1;

/// Scores for one clip, all in dB.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipScore {
    pub id: String,
    pub si_sdr: f64,
    pub si_sdr_mixture: f64,
    pub si_sdri: f64,
    pub sdr: f64,
    pub sdr_mixture: f64,
    pub sdri: f64,
}

impl ClipScore {
    /// Score `est` against `gt`, with mixture channel 0 as the baseline.
    /// All three must have the same length.
    pub fn compute(id: &str, est: &[f32], mixture0: &[f32], gt: &[f32]) -> Result<Self> {
        if mixture0.len() != gt.len() {
            return Err(Error::Shape(format!("mixture has {} samples, groundtruth {}", mixture0.len(), gt.len())));
        }
        let si = si_sdr(est, gt)?;
        let si_mix = si_sdr(mixture0, gt)?;
        let s = sdr(est, gt)?;
        let s_mix = sdr(mixture0, gt)?;
        Ok(ClipScore {
            id: id.to_string(),
            si_sdr: si,
            si_sdr_mixture: si_mix,
            si_sdri: si - si_mix,
            sdr: s,
            sdr_mixture: s_mix,
            sdri: s - s_mix,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub clips: Vec<ClipScore>,
    /// Ids of clips without groundtruth (or with a silent one).
    pub skipped: Vec<String>,
}

impl EvalReport {
    pub fn mean_si_sdri(&self) -> f64 {
        mean(self.clips.iter().map(|c| c.si_sdri))
    }

    pub fn mean_sdri(&self) -> f64 {
        mean(self.clips.iter().map(|c| c.sdri))
    }

    pub fn mean_si_sdr(&self) -> f64 {
        mean(self.clips.iter().map(|c| c.si_sdr))
    }

    /// Per-clip TSV followed by `#` summary lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("id\tsi_sdr\tsi_sdr_mixture\tsi_sdri\tsdr\tsdr_mixture\tsdri\n");
        for c in &self.clips {
            let _ = writeln!(
                s,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                c.id, c.si_sdr, c.si_sdr_mixture, c.si_sdri, c.sdr, c.sdr_mixture, c.sdri
            );
        }
        let _ = writeln!(s, "# clips\t{}", self.clips.len());
        let _ = writeln!(s, "# skipped\t{}", self.skipped.len());
        let _ = writeln!(s, "# mean_si_sdri\t{:.4}", self.mean_si_sdri());
        let _ = writeln!(s, "# mean_sdri\t{:.4}", self.mean_sdri());
        s
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::nn::weights::write_atomic(path.as_ref(), self.to_tsv().as_bytes())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Score a system over every clip of `dataset`. `system` maps a mixture and
/// look direction to an output delayed by `delay` samples; the first
/// `len - delay` groundtruth samples are scored against output `delay..len`.
pub fn evaluate_with<F>(dataset: &Dataset, delay: usize, mut system: F) -> Result<EvalReport>
where
    F: FnMut(&MultichannelBuffer<f32>, f64) -> Result<Vec<f32>>,
{
    let mut report = EvalReport::default();
    for i in 0..dataset.len() {
        let meta = dataset.meta(i);
        let Some(gt) = dataset.load_groundtruth(i)? else {
            report.skipped.push(meta.id.clone());
            continue;
        };
        let mixture = dataset.load_mixture(i)?;
        let len = mixture.len();
        if gt.len() != len {
            return Err(Error::Input(format!("{}: groundtruth must match the mixture length", meta.id)));
        }
        if len <= delay {
            return Err(Error::Input(format!("{}: clip shorter than the {delay}-sample delay", meta.id)));
        }
        let n = len - delay;
        if gt[..n].iter().all(|v| *v == 0.0) {
            report.skipped.push(meta.id.clone());
            continue;
        }
        let out = system(&mixture, meta.theta_input)?;
        if out.len() < len {
            return Err(Error::Internal(format!("system returned {} samples for {len}", out.len())));
        }
        report
            .clips
            .push(ClipScore::compute(&meta.id, &out[delay..len], &mixture.channel(0)[..n], &gt[..n])?);
    }
    Ok(report)
}

fn check_mics(dataset: &Dataset, mics: usize) -> Result<()> {
    let have = dataset.manifest().num_mics;
    if have != mics {
        return Err(Error::Config(format!(
            "dataset {} has {have} microphones, model expects {mics}",
            dataset.dir().display()
        )));
    }
    Ok(())
}

/// Network output for one mixture, delayed by [`PREBEAM_DELAY`] relative to it.
pub fn separate_clip(
    weights: &ModelWeights<f32>,
    prebeam: &Prebeamformer,
    mixture: &MultichannelBuffer<f32>,
) -> Result<Vec<f32>> {
    let features = prebeam.process_signal(mixture)?;
    nn::separate_offline(weights, features.channels())
}

/// Evaluate a trained model on `dataset`.
pub fn evaluate(weights: &ModelWeights<f32>, dataset: &Dataset, params: &BeamformerParams) -> Result<EvalReport> {
    let cfg = weights.config();
    check_mics(dataset, cfg.mics)?;
    let geometry = dataset.geometry()?;
    let mut prebeam = Prebeamformer::new(geometry, params.clone(), 0.0, cfg.use_beamformers)?;
    evaluate_with(dataset, PREBEAM_DELAY, |mix, theta| {
        prebeam.set_theta(theta)?;
        separate_clip(weights, &prebeam, mix)
    })
}

/// Evaluate the online MVDR beamformer alone.
pub fn evaluate_mvdr(dataset: &Dataset, params: &BeamformerParams) -> Result<EvalReport> {
    let geometry = dataset.geometry()?;
    let mut prebeam = Prebeamformer::new(geometry, params.clone(), 0.0, true)?;
    evaluate_with(dataset, PREBEAM_DELAY, |mix, theta| {
        prebeam.set_theta(theta)?;
        let mut rows = prebeam.process_signal(mix)?.into_channels();
        Ok(rows.swap_remove(MVDR_ROW))
    })
}
