//! The engine configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! theta_deg = 30.0
//!
//! [array]
//! preset = "circular"
//! n = 6
//! radius = 0.05
//!
//! [model]
//! preset = "toy"
//! use_beamformers = false
//!
//! [paths]
//! weights = "runs/toy/best.ckpt"
//! ```
//!
//! Unknown keys anywhere are rejected. The scene generator always uses the
//! top-level `[array]`; the model's microphone count must match it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beamformer::BeamformerParams;
use crate::geometry::{wrap_angle, ArrayGeometry, ArrayLayout};
use crate::nn::ModelConfig;
use crate::room::SceneConfig;
use crate::train::TrainConfig;
use crate::{Error, Result};

/// `[model]`: a preset plus optional per-field overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `hybridbeam` (default), `hybridbeam-plus` or `toy`.
    pub preset: Option<String>,
    pub k: Option<usize>,
    pub stacks: Option<usize>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub encoder_channels: Option<usize>,
    pub block_channels: Option<usize>,
    pub mics: Option<usize>,
    pub encoder_kernel: Option<usize>,
    pub encoder_stride: Option<usize>,
    pub use_beamformers: Option<bool>,
    pub share_trelu: Option<bool>,
    pub norm_epsilon: Option<f64>,
}

impl ModelSection {
    pub fn resolve(&self) -> Result<ModelConfig> {
        let mut m = ModelConfig::preset(self.preset.as_deref().unwrap_or("hybridbeam"))?;
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { m.$f = v; } )*};
        }
        set!(k, stacks, layers, hidden, encoder_channels, block_channels, mics, encoder_kernel, encoder_stride);
        set!(use_beamformers, share_trelu, norm_epsilon);
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub weights: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub val_dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub seed: u64,
    /// Look direction in degrees, counter-clockwise from the x axis.
    pub theta_deg: f64,
    pub array: ArrayLayout,
    pub model: ModelSection,
    pub beamformer: BeamformerParams,
    pub scene: SceneConfig,
    pub train: TrainConfig,
    pub paths: Paths,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            theta_deg: 0.0,
            array: ArrayLayout::default(),
            model: ModelSection::default(),
            beamformer: BeamformerParams::default(),
            scene: SceneConfig::default(),
            train: TrainConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
        c.scene.array = c.array.clone();
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::from_layout(&self.array)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        self.model.resolve()
    }

    /// Look direction in radians, wrapped to `[-pi, pi)`.
    pub fn theta(&self) -> f64 {
        wrap_angle(self.theta_deg.to_radians())
    }

    /// Check every section and their agreement.
    pub fn validate(&self) -> Result<()> {
        if !self.theta_deg.is_finite() {
            return Err(Error::Config("theta_deg must be finite".into()));
        }
        let g = self.geometry()?;
        let m = self.model_config()?;
        if m.mics != g.num_mics() {
            return Err(Error::Config(format!(
                "model expects {} microphones but the array has {}",
                m.mics,
                g.num_mics()
            )));
        }
        self.beamformer.validate()?;
        let mut scene = self.scene.clone();
        scene.array = self.array.clone();
        scene.validate()?;
        self.train.validate()
    }
}
