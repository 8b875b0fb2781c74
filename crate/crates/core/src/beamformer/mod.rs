//! Channel alignment and the three lightweight pre-beamformers.
//!
//! All three work per STFT bin on the raw (unaligned) microphone spectra:
//!
//! - superdirective: MVDR against the diffuse-noise coherence matrix, fixed for a direction
//! - online MVDR: exponentially weighted mixture covariance, re-solved every frame
//! - nonlinear: delay-and-sum followed by a coherence-ratio mask
//!
//! The superdirective and MVDR designs are distortionless toward the look
//! direction (`w^H d = 1`), so their outputs are time-aligned with mic 0.

mod align;
mod mvdr;
mod nonlinear;
mod prebeam;
mod superdirective;

use serde::{Deserialize, Serialize};

pub use align::align_channels;
pub use mvdr::{mvdr_weights, MvdrState};
pub use nonlinear::{nonlinear_mask, nonlinear_process};
pub use prebeam::{Prebeamformer, PrebeamOutput, NUM_BEAMFORMERS, PREBEAM_DELAY};
pub use superdirective::{diffuse_coherence, diffuse_noise_gain, superdirective_design, SuperdirectiveWeights};

/// Tunables for the three beamformers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamformerParams {
    /// MVDR forgetting factor.
    pub forgetting_factor: f64,
    /// MVDR diagonal loading relative to `trace(R) / c`.
    pub mvdr_loading: f64,
    /// Superdirective diagonal loading.
    pub superdirective_loading: f64,
    /// Lower bound of the nonlinear mask.
    pub mask_floor: f64,
    /// Regularizer in the nonlinear mask denominator.
    pub mask_epsilon: f64,
}

impl Default for BeamformerParams {
    fn default() -> Self {
        BeamformerParams {
            forgetting_factor: 0.95,
            mvdr_loading: 1e-3,
            superdirective_loading: 1e-2,
            mask_floor: 0.1,
            mask_epsilon: 1e-12,
        }
    }
}

impl BeamformerParams {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::Config(m.to_string()));
        if !(self.forgetting_factor > 0.0 && self.forgetting_factor <= 1.0) {
            return bad("forgetting_factor must be in (0, 1]");
        }
        if !(self.mvdr_loading > 0.0) || !(self.superdirective_loading > 0.0) {
            return bad("diagonal loading must be > 0");
        }
        if !(0.0..=1.0).contains(&self.mask_floor) {
            return bad("mask_floor must be in [0, 1]");
        }
        if !(self.mask_epsilon > 0.0) {
            return bad("mask_epsilon must be > 0");
        }
        Ok(())
    }
}
