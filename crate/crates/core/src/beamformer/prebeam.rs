use num_complex::Complex64;

use super::mvdr::MvdrState;
use super::nonlinear::nonlinear_process;
use super::superdirective::{superdirective_from_steering, SuperdirectiveWeights};
use super::{align_channels, BeamformerParams};
use crate::geometry::{ArrayGeometry, SteeringVector};
use crate::signal::{MultichannelBuffer, StftConfig, StreamingAnalysis, StreamingSynthesis};
use crate::{Error, Result, BLOCK_SIZE, SAMPLE_RATE};

/// Superdirective, MVDR, nonlinear.
pub const NUM_BEAMFORMERS: usize = 3;

/// Samples of delay added by the 256/128 STFT analysis-synthesis.
pub const PREBEAM_DELAY: usize = 128;

const FFT_SIZE: usize = 256;

/// One block of prebeam output: `[superdirective, mvdr, nonlinear, aligned mic 0..c]`
/// or only the aligned mics when the beamformers are disabled.
#[derive(Clone, Debug, PartialEq)]
pub struct PrebeamOutput {
    pub channels: Vec<Vec<f32>>,
}

impl PrebeamOutput {
    pub fn new(num_channels: usize) -> Self {
        PrebeamOutput {
            channels: vec![vec![0.0; BLOCK_SIZE]; num_channels],
        }
    }
}

/// Streaming front end: STFT, alignment, the three beamformers, inverse STFT.
#[derive(Clone, Debug)]
pub struct Prebeamformer {
    geometry: ArrayGeometry,
    params: BeamformerParams,
    use_beamformers: bool,
    theta: f64,
    stft: StftConfig<f64>,
    steering: Vec<SteeringVector>,
    superdirective: Option<SuperdirectiveWeights>,
    mvdr: MvdrState,
    analysis: Vec<StreamingAnalysis<f64>>,
    synthesis: Vec<StreamingSynthesis<f64>>,
    block: Vec<f64>,
    out: Vec<f64>,
}

impl Prebeamformer {
    pub fn new(geometry: ArrayGeometry, params: BeamformerParams, theta: f64, use_beamformers: bool) -> Result<Self> {
        params.validate()?;
        let stft = StftConfig::sqrt_hann(FFT_SIZE, BLOCK_SIZE)?;
        let c = geometry.num_mics();
        let outputs = c + if use_beamformers { NUM_BEAMFORMERS } else { 0 };
        let mut p = Prebeamformer {
            mvdr: MvdrState::new(c, stft.num_bins(), params.forgetting_factor, params.mvdr_loading),
            analysis: (0..c).map(|_| StreamingAnalysis::new(&stft)).collect(),
            synthesis: (0..outputs).map(|_| StreamingSynthesis::new(&stft)).collect(),
            geometry,
            params,
            use_beamformers,
            theta: f64::NAN,
            stft,
            steering: Vec::new(),
            superdirective: None,
            block: vec![0.0; BLOCK_SIZE],
            out: vec![0.0; BLOCK_SIZE],
        };
        p.set_theta(theta)?;
        Ok(p)
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn num_outputs(&self) -> usize {
        self.synthesis.len()
    }

    pub fn uses_beamformers(&self) -> bool {
        self.use_beamformers
    }

    pub fn mvdr(&self) -> &MvdrState {
        &self.mvdr
    }

    /// Re-steer without touching the running covariance or overlap state.
    pub fn set_theta(&mut self, theta: f64) -> Result<()> {
        if !theta.is_finite() {
            return Err(Error::Input(format!("theta must be finite, got {theta}")));
        }
        if theta == self.theta {
            return Ok(());
        }
        self.theta = theta;
        self.steering = self.geometry.steering_bins(theta, FFT_SIZE, SAMPLE_RATE as f64);
        if self.use_beamformers {
            self.superdirective = Some(superdirective_from_steering(
                &self.geometry,
                &self.steering,
                self.params.superdirective_loading,
            )?);
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        let c = self.geometry.num_mics();
        self.mvdr = MvdrState::new(c, self.stft.num_bins(), self.params.forgetting_factor, self.params.mvdr_loading);
        self.analysis.iter_mut().for_each(|a| a.reset());
        self.synthesis.iter_mut().for_each(|s| s.reset());
    }

    /// Consume one `c x 128` block and write `num_outputs() x 128` samples,
    /// each delayed by [`PREBEAM_DELAY`].
    pub fn process_block<B: AsRef<[f32]>>(&mut self, block: &[B], out: &mut PrebeamOutput) -> Result<()> {
        let c = self.geometry.num_mics();
        if block.len() != c {
            return Err(Error::Stream(format!("expected {c} channels, got {}", block.len())));
        }
        if let Some(b) = block.iter().find(|b| b.as_ref().len() != BLOCK_SIZE) {
            return Err(Error::Stream(format!(
                "block must be {BLOCK_SIZE} samples, got {}",
                b.as_ref().len()
            )));
        }
        if out.channels.len() != self.num_outputs() || out.channels.iter().any(|ch| ch.len() != BLOCK_SIZE) {
            return Err(Error::Shape(format!(
                "prebeam output must be {} x {BLOCK_SIZE}",
                self.num_outputs()
            )));
        }

        let mut spectra = Vec::with_capacity(c);
        for (ch, analysis) in block.iter().zip(&mut self.analysis) {
            for (d, s) in self.block.iter_mut().zip(ch.as_ref()) {
                *d = *s as f64;
            }
            spectra.push(analysis.push(&self.stft, &self.block));
        }
        let aligned = align_channels(&spectra, &self.steering);

        let mut beams: Vec<Vec<Complex64>> = Vec::with_capacity(NUM_BEAMFORMERS);
        if let Some(sd) = &self.superdirective {
            beams.push(sd.apply(&spectra));
            self.mvdr.update(&spectra);
            beams.push(self.mvdr.process(&spectra, &self.steering)?);
            beams.push(nonlinear_process(&aligned, self.params.mask_floor, self.params.mask_epsilon));
        }
        for ((bins, synth), dst) in beams
            .iter()
            .chain(&aligned)
            .zip(&mut self.synthesis)
            .zip(&mut out.channels)
        {
            synth.push(&self.stft, bins, &mut self.out);
            for (d, s) in dst.iter_mut().zip(&self.out) {
                *d = *s as f32;
            }
        }
        Ok(())
    }

    /// Run a whole signal through a fresh copy of the streaming front end.
    /// The input is zero-padded to a multiple of 128; the output has the
    /// same padded length and carries the [`PREBEAM_DELAY`] shift.
    pub fn process_signal(&self, input: &MultichannelBuffer<f32>) -> Result<MultichannelBuffer<f32>> {
        let mut p = self.clone();
        p.reset();
        let blocks = input.len().div_ceil(BLOCK_SIZE);
        let mut channels = vec![Vec::with_capacity(blocks * BLOCK_SIZE); p.num_outputs()];
        let mut out = PrebeamOutput::new(p.num_outputs());
        for b in 0..blocks {
            let chunk = input.slice(b * BLOCK_SIZE, BLOCK_SIZE);
            p.process_block(chunk.channels(), &mut out)?;
            for (dst, src) in channels.iter_mut().zip(&out.channels) {
                dst.extend_from_slice(src);
            }
        }
        MultichannelBuffer::new(channels)
    }
}
