//! Block-by-block engine.
//!
//! A [`StreamState`] takes `c x 128` microphone blocks and returns 128
//! separated samples per block. Output sample `n` estimates the target at
//! mixture time `n - 152`: 128 samples from the prebeam STFT and 24 from the
//! decoder lookahead. [`offline_forward`] computes the same function over a
//! whole signal in one pass.

mod bench;
mod network;

use std::sync::Arc;

pub use bench::{bench, BenchReport, LatencyBudget, StageTiming};
pub use network::StreamNetwork;
use network::NetState;

use crate::beamformer::{BeamformerParams, PrebeamOutput, Prebeamformer, PREBEAM_DELAY};
use crate::geometry::ArrayGeometry;
use crate::nn::{self, ModelConfig, ModelWeights};
use crate::signal::MultichannelBuffer;
use crate::{Error, Real, Result, BLOCK_SIZE};

/// Mixture-to-output delay of the streaming engine in samples.
pub fn total_delay(config: &ModelConfig) -> usize {
    PREBEAM_DELAY + config.lookahead_samples()
}

/// Everything one stream needs between blocks.
#[derive(Clone, Debug)]
pub struct StreamState<T> {
    net: Arc<StreamNetwork<T>>,
    prebeam: Prebeamformer,
    features: PrebeamOutput,
    input: Vec<T>,
    state: NetState<T>,
    poisoned: Option<String>,
}

impl<T: Real> StreamState<T> {
    /// Fresh stream with default beamformer parameters.
    pub fn new(config: &ModelConfig, weights: &ModelWeights<T>, geometry: ArrayGeometry, theta: f64) -> Result<Self> {
        if weights.config() != config {
            return Err(Error::Config("weights were built for a different model config".into()));
        }
        Self::with_network(Arc::new(StreamNetwork::new(weights)), geometry, BeamformerParams::default(), theta)
    }

    /// Fresh stream sharing an already packed network.
    pub fn with_network(net: Arc<StreamNetwork<T>>, geometry: ArrayGeometry, params: BeamformerParams, theta: f64) -> Result<Self> {
        let cfg = net.config();
        cfg.validate()?;
        if geometry.num_mics() != cfg.mics {
            return Err(Error::Config(format!(
                "model expects {} microphones, geometry has {}",
                cfg.mics,
                geometry.num_mics()
            )));
        }
        let prebeam = Prebeamformer::new(geometry, params, theta, cfg.use_beamformers)?;
        Ok(StreamState {
            features: PrebeamOutput::new(prebeam.num_outputs()),
            input: vec![T::zero(); cfg.input_channels() * BLOCK_SIZE],
            state: NetState::new(&net),
            prebeam,
            net,
            poisoned: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        self.net.config()
    }

    pub fn network(&self) -> &Arc<StreamNetwork<T>> {
        &self.net
    }

    pub fn theta(&self) -> f64 {
        self.prebeam.theta()
    }

    /// Change the look direction for subsequent blocks; caches are kept.
    pub fn set_theta(&mut self, theta: f64) -> Result<()> {
        self.prebeam.set_theta(theta)
    }

    /// Back to the freshly created state (same theta).
    pub fn reset(&mut self) {
        self.prebeam.reset();
        self.state.reset();
        self.poisoned = None;
    }

    /// Samples consumed since creation or reset.
    pub fn sample_clock(&self) -> u64 {
        self.state.clock()
    }

    /// Complex frames held by the network's conv caches.
    pub fn cached_frames(&self) -> usize {
        self.state.cached_frames(&self.net)
    }

    /// Scalars held by the network part of the state.
    pub fn state_scalars(&self) -> usize {
        self.state.scalars()
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.is_some()
    }

    /// One `c x 128` mixture block in, 128 output samples out.
    pub fn process_block<B: AsRef<[f32]>>(&mut self, block: &[B], out: &mut [T]) -> Result<()> {
        self.check_out(out)?;
        self.check_input(block)?;
        self.prebeam_stage(block)?;
        self.run_network(out)
    }

    fn check_input<B: AsRef<[f32]>>(&mut self, block: &[B]) -> Result<()> {
        if let Some(why) = &self.poisoned {
            return Err(Error::Poisoned(why.clone()));
        }
        if block.iter().any(|ch| ch.as_ref().iter().any(|v| !v.is_finite())) {
            let why = format!("non-finite input sample in block at clock {}", self.sample_clock());
            self.poisoned = Some(why.clone());
            return Err(Error::Poisoned(why));
        }
        Ok(())
    }

    fn prebeam_stage<B: AsRef<[f32]>>(&mut self, block: &[B]) -> Result<()> {
        self.prebeam.process_block(block, &mut self.features)?;
        for (r, ch) in self.features.channels.iter().enumerate() {
            for (d, s) in self.input[r * BLOCK_SIZE..(r + 1) * BLOCK_SIZE].iter_mut().zip(ch) {
                *d = T::cst(*s as f64);
            }
        }
        Ok(())
    }

    /// Bypass the prebeam stage: `features` is `(c + 3) x 128` (or `c x 128`
    /// without beamformers) network input. Output lags the features by the
    /// decoder lookahead only.
    pub fn process_features<B: AsRef<[T]>>(&mut self, features: &[B], out: &mut [T]) -> Result<()> {
        self.check_out(out)?;
        if let Some(why) = &self.poisoned {
            return Err(Error::Poisoned(why.clone()));
        }
        let rows = self.config().input_channels();
        if features.len() != rows || features.iter().any(|f| f.as_ref().len() != BLOCK_SIZE) {
            return Err(Error::Stream(format!("features must be {rows} x {BLOCK_SIZE}")));
        }
        if features.iter().any(|f| f.as_ref().iter().any(|v| !v.is_finite())) {
            let why = "non-finite feature value".to_string();
            self.poisoned = Some(why.clone());
            return Err(Error::Poisoned(why));
        }
        for (r, f) in features.iter().enumerate() {
            self.input[r * BLOCK_SIZE..(r + 1) * BLOCK_SIZE].copy_from_slice(f.as_ref());
        }
        self.run_network(out)
    }

    fn check_out(&self, out: &[T]) -> Result<()> {
        if out.len() != BLOCK_SIZE {
            return Err(Error::Stream(format!("output block must be {BLOCK_SIZE} samples, got {}", out.len())));
        }
        Ok(())
    }

    fn run_network(&mut self, out: &mut [T]) -> Result<()> {
        self.state.process(&self.net, &self.input, out);
        if out.iter().any(|v| !v.is_finite()) {
            let why = format!("network produced a non-finite sample at clock {}", self.sample_clock());
            self.poisoned = Some(why.clone());
            return Err(Error::Poisoned(why));
        }
        Ok(())
    }

    /// [`Self::process_block`] returning seconds spent in the prebeam stage and in the network.
    pub(crate) fn process_block_timed<B: AsRef<[f32]>>(&mut self, block: &[B], out: &mut [T]) -> Result<(f64, f64)> {
        self.check_out(out)?;
        self.check_input(block)?;
        let t0 = std::time::Instant::now();
        self.prebeam_stage(block)?;
        let t1 = std::time::Instant::now();
        self.run_network(out)?;
        let t2 = std::time::Instant::now();
        Ok(((t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64()))
    }
}

/// Run a whole mixture through the streaming engine block by block.
/// Output is `ceil(len / 128) * 128` samples.
pub fn stream_signal<T: Real>(state: &mut StreamState<T>, mixture: &MultichannelBuffer<f32>) -> Result<Vec<T>> {
    let blocks = mixture.len().div_ceil(BLOCK_SIZE);
    let mut out = vec![T::zero(); blocks * BLOCK_SIZE];
    for b in 0..blocks {
        let chunk = mixture.slice(b * BLOCK_SIZE, BLOCK_SIZE);
        state.process_block(chunk.channels(), &mut out[b * BLOCK_SIZE..(b + 1) * BLOCK_SIZE])?;
    }
    Ok(out)
}

/// Whole-signal forward pass aligned exactly like [`stream_signal`]'s output.
pub fn offline_forward<T: Real>(
    weights: &ModelWeights<T>,
    geometry: &ArrayGeometry,
    params: BeamformerParams,
    theta: f64,
    mixture: &MultichannelBuffer<f32>,
) -> Result<Vec<T>> {
    let cfg = weights.config();
    let prebeam = Prebeamformer::new(geometry.clone(), params, theta, cfg.use_beamformers)?;
    let features = prebeam.process_signal(mixture)?;
    let rows: Vec<Vec<T>> = features
        .channels()
        .iter()
        .map(|ch| ch.iter().map(|v| T::cst(*v as f64)).collect())
        .collect();
    offline_features(weights, &rows)
}

/// Whole-sequence network pass on prebeam features, delayed by the decoder
/// lookahead like [`StreamState::process_features`].
pub fn offline_features<T: Real, R: AsRef<[T]>>(weights: &ModelWeights<T>, features: &[R]) -> Result<Vec<T>> {
    let z = nn::separate_offline(weights, features)?;
    let lag = weights.config().lookahead_samples();
    let mut out = vec![T::zero(); z.len()];
    if z.len() > lag {
        out[lag..].copy_from_slice(&z[..z.len() - lag]);
    }
    Ok(out)
}

/// Bytes of per-block cache traffic if every layer's padding were shifted
/// by copying, for the strided design and for the same layers without
/// downsampling (dilations scaled by `2^s` so the receptive field matches).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateBytes {
    pub strided: usize,
    pub plain_tcn: usize,
}

impl StateBytes {
    /// `1 - strided / plain_tcn`.
    pub fn reduction(&self) -> f64 {
        1.0 - self.strided as f64 / self.plain_tcn as f64
    }
}

/// Bytes per complex value in the f32 engine.
const COMPLEX_BYTES: usize = 8;

pub fn state_bytes(config: &ModelConfig) -> StateBytes {
    let span = config.k.pow(config.layers as u32) - 1;
    let n = config.stacks;
    let encoder = config.encoder_pad() * config.input_channels() * 4;
    // each stack caches (k-1)(1 + k + ... + k^(M-1)) = k^M - 1 frames of H channels
    let strided = n * span * config.hidden + n.saturating_sub(1) * config.block_channels;
    let plain = ((1usize << n) - 1) * span * config.hidden;
    StateBytes {
        strided: encoder + strided * COMPLEX_BYTES,
        plain_tcn: encoder + plain * COMPLEX_BYTES,
    }
}
