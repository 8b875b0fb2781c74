//! Browser demo: beam patterns, room impulse responses and the
//! architecture calculator, exported through wasm-bindgen.
//!
//! Each export wraps a plain Rust function returning `Result<_, String>`;
//! the native tests in `tests/` call those, since `JsError` only exists
//! inside a JS host.

use dirhear::beamformer::{diffuse_noise_gain, superdirective_design};
use dirhear::geometry::{ArrayGeometry, DEFAULT_SPEED_OF_SOUND};
use dirhear::nn::ModelConfig;
use dirhear::room::{absorption_for_rt60, image_source_rir, order_for_duration, schroeder_rt60, RoomSpec};
use dirhear::stream::state_bytes;
use dirhear::SAMPLE_RATE;
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

/// Transform size used to pick the superdirective design bin.
const DESIGN_FFT: usize = 512;

/// Reflection order limit for [`room_response`].
pub const MAX_ORDER: usize = 60;

fn js_err(e: String) -> JsError {
    JsError::new(&e)
}

/// Response of a circular-array beamformer steered to `look_deg`.
#[wasm_bindgen]
pub struct BeamPattern {
    gains_db: Vec<f64>,
    frequency: f64,
    directivity_db: f64,
}

#[wasm_bindgen]
impl BeamPattern {
    /// `|w^H d(phi)|^2` in dB for phi = 0, 1, ..., 359 degrees.
    #[wasm_bindgen(getter)]
    pub fn gains_db(&self) -> Vec<f64> {
        self.gains_db.clone()
    }

    /// Bin centre actually evaluated (Hz).
    #[wasm_bindgen(getter)]
    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Gain against spherically isotropic noise (dB).
    #[wasm_bindgen(getter)]
    pub fn directivity_db(&self) -> f64 {
        self.directivity_db
    }
}

/// `kind` is `"das"` or `"superdirective"`; `loading` only affects the latter.
#[wasm_bindgen]
pub fn beam_pattern(mics: usize, radius_m: f64, look_deg: f64, frequency_hz: f64, kind: &str, loading: f64) -> Result<BeamPattern, JsError> {
    compute_beam_pattern(mics, radius_m, look_deg, frequency_hz, kind, loading).map_err(js_err)
}

pub fn compute_beam_pattern(
    mics: usize,
    radius_m: f64,
    look_deg: f64,
    frequency_hz: f64,
    kind: &str,
    loading: f64,
) -> Result<BeamPattern, String> {
    let g = ArrayGeometry::circular(mics, radius_m).map_err(|e| e.to_string())?;
    let nyquist = SAMPLE_RATE as f64 / 2.0;
    if !(frequency_hz > 0.0 && frequency_hz <= nyquist) {
        return Err(format!("frequency must be in (0, {nyquist}] Hz"));
    }
    let bin = ((frequency_hz * DESIGN_FFT as f64 / SAMPLE_RATE as f64).round() as usize).clamp(1, DESIGN_FFT / 2);
    let f = bin as f64 * SAMPLE_RATE as f64 / DESIGN_FFT as f64;
    let look = look_deg.to_radians();
    let w: Vec<Complex64> = match kind {
        "das" => {
            let m = mics as f64;
            g.steering_vector(look, f).entries.iter().map(|d| d / m).collect()
        }
        "superdirective" => {
            if !(loading >= 0.0 && loading.is_finite()) {
                return Err("loading must be >= 0".into());
            }
            superdirective_design(&g, look, DESIGN_FFT, loading).map_err(|e| e.to_string())?.weights.swap_remove(bin)
        }
        other => return Err(format!("unknown beamformer `{other}`, expected das or superdirective")),
    };
    let gains_db = (0..360)
        .map(|deg| {
            let d = g.steering_vector((deg as f64).to_radians(), f);
            let r: Complex64 = w.iter().zip(&d.entries).map(|(w, d)| w.conj() * d).sum();
            10.0 * r.norm_sqr().max(1e-12).log10()
        })
        .collect();
    let look_gain: Complex64 = w.iter().zip(&g.steering_vector(look, f).entries).map(|(w, d)| w.conj() * d).sum();
    let directivity_db = 10.0 * (look_gain.norm_sqr() / diffuse_noise_gain(&g, &w, f)).log10();
    Ok(BeamPattern {
        gains_db,
        frequency: f,
        directivity_db,
    })
}

/// One image-source impulse response and its decay analysis.
#[wasm_bindgen]
pub struct RoomResponse {
    samples: Vec<f32>,
    absorption: f64,
    clamped: bool,
    max_order: usize,
    measured_rt60: Option<f64>,
}

#[wasm_bindgen]
impl RoomResponse {
    /// The RIR at 16 kHz.
    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> Vec<f32> {
        self.samples.clone()
    }

    /// Uniform wall absorption from Sabine's formula.
    #[wasm_bindgen(getter)]
    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    /// True when the target RT60 was too short for the room and absorption hit 1.
    #[wasm_bindgen(getter)]
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    #[wasm_bindgen(getter)]
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Schroeder-integral estimate (s); NaN when the decay is too short to fit.
    #[wasm_bindgen(getter)]
    pub fn measured_rt60(&self) -> f64 {
        self.measured_rt60.unwrap_or(f64::NAN)
    }
}

/// Render the response between `src` and `mic` (metres) in a shoebox room
/// whose absorption is set for `rt60` seconds.
#[wasm_bindgen]
pub fn room_response(dims: &[f64], rt60: f64, src: &[f64], mic: &[f64]) -> Result<RoomResponse, JsError> {
    compute_room_response(dims, rt60, src, mic).map_err(js_err)
}

pub fn compute_room_response(dims: &[f64], rt60: f64, src: &[f64], mic: &[f64]) -> Result<RoomResponse, String> {
    let as3 = |v: &[f64], what: &str| -> Result<[f64; 3], String> {
        v.try_into().map_err(|_| format!("{what} needs 3 coordinates, got {}", v.len()))
    };
    let dims = as3(dims, "room")?;
    let (src, mic) = (as3(src, "source")?, as3(mic, "microphone")?);
    let (alpha, clamped) = absorption_for_rt60(dims, rt60).map_err(|e| e.to_string())?;
    let probe = RoomSpec::uniform(dims, alpha, 0).map_err(|e| e.to_string())?;
    // a bit past the decay time so the Schroeder fit has a tail; the order
    // cap bounds the image count (about 4/3 N^3) for the browser
    let max_order = order_for_duration(&probe, 1.2 * rt60, DEFAULT_SPEED_OF_SOUND).min(MAX_ORDER);
    let room = RoomSpec { max_order, ..probe };
    let rir = image_source_rir(&room, &src, &mic, DEFAULT_SPEED_OF_SOUND).map_err(|e| e.to_string())?;
    Ok(RoomResponse {
        measured_rt60: schroeder_rt60(&rir),
        samples: rir.iter().map(|&v| v as f32).collect(),
        absorption: alpha,
        clamped,
        max_order,
    })
}

/// Size, cost and latency of a separator configuration.
#[wasm_bindgen]
pub struct Architecture {
    config: ModelConfig,
}

#[wasm_bindgen]
impl Architecture {
    /// Start from `hybridbeam`, `hybridbeam-plus` or `toy`.
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str) -> Result<Architecture, JsError> {
        Self::from_preset(preset).map_err(js_err)
    }

    /// Replace the TCN shape; fails without changing anything if invalid.
    pub fn set_shape(&mut self, k: usize, stacks: usize, layers: usize, hidden: usize, encoder_channels: usize, block_channels: usize) -> Result<(), JsError> {
        self.try_set_shape(k, stacks, layers, hidden, encoder_channels, block_channels).map_err(js_err)
    }

    pub fn set_mics(&mut self, mics: usize) -> Result<(), JsError> {
        self.try_set_mics(mics).map_err(js_err)
    }

    pub fn set_use_beamformers(&mut self, on: bool) {
        self.config.use_beamformers = on;
    }

    /// Current `[k, stacks, layers, hidden, encoder_channels, block_channels, mics]`.
    #[wasm_bindgen(getter)]
    pub fn shape(&self) -> Vec<usize> {
        let c = &self.config;
        vec![c.k, c.stacks, c.layers, c.hidden, c.encoder_channels, c.block_channels, c.mics]
    }

    #[wasm_bindgen(getter)]
    pub fn params(&self) -> usize {
        self.config.count_params_and_macs().params
    }

    #[wasm_bindgen(getter)]
    pub fn macs_per_second(&self) -> f64 {
        self.config.count_params_and_macs().macs_per_second
    }

    /// Seconds.
    #[wasm_bindgen(getter)]
    pub fn receptive_field(&self) -> f64 {
        self.config.receptive_field()
    }

    #[wasm_bindgen(getter)]
    pub fn lookahead_ms(&self) -> f64 {
        self.config.lookahead_ms()
    }

    /// Bytes copied per block by the strided cache.
    #[wasm_bindgen(getter)]
    pub fn state_bytes(&self) -> usize {
        state_bytes(&self.config).strided
    }

    /// Same receptive field with an unstrided TCN.
    #[wasm_bindgen(getter)]
    pub fn plain_state_bytes(&self) -> usize {
        state_bytes(&self.config).plain_tcn
    }

    #[wasm_bindgen(getter)]
    pub fn state_reduction(&self) -> f64 {
        state_bytes(&self.config).reduction()
    }
}

impl Architecture {
    pub fn from_preset(preset: &str) -> Result<Architecture, String> {
        Ok(Architecture {
            config: ModelConfig::preset(preset).map_err(|e| e.to_string())?,
        })
    }

    pub fn try_set_shape(&mut self, k: usize, stacks: usize, layers: usize, hidden: usize, encoder_channels: usize, block_channels: usize) -> Result<(), String> {
        // keep the cache arithmetic far from overflow for page inputs
        if k.checked_pow(layers as u32).is_none_or(|s| s > 1 << 20) || stacks > 16 || hidden.max(encoder_channels).max(block_channels) > 1 << 14 {
            return Err("shape too large for the calculator".into());
        }
        let mut c = self.config.clone();
        (c.k, c.stacks, c.layers, c.hidden, c.encoder_channels, c.block_channels) = (k, stacks, layers, hidden, encoder_channels, block_channels);
        c.validate().map_err(|e| e.to_string())?;
        self.config = c;
        Ok(())
    }

    pub fn try_set_mics(&mut self, mics: usize) -> Result<(), String> {
        if mics > 64 {
            return Err("at most 64 microphones".into());
        }
        let mut c = self.config.clone();
        c.mics = mics;
        c.validate().map_err(|e| e.to_string())?;
        self.config = c;
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }
}
