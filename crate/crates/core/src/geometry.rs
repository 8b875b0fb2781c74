//! Microphone layouts, far-field arrival times and steering vectors.
//!
//! Direction convention, used everywhere: azimuth `theta` is measured
//! counterclockwise from the +x axis in the horizontal plane, `u(theta)`
//! points from the array toward the source, and a plane wave reaches mic `i`
//! at `t_i = -(p_i . u) / c` relative to the array origin, so mics closer to
//! the source have more negative arrival times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Mic positions in meters; mic 0 is the reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    speed_of_sound: f64,
}

/// Per-mic phase factors for one frequency, relative to mic 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    pub frequency: f64,
    pub entries: Vec<Complex64>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        Self::with_speed(positions, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn with_speed(positions: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("array needs at least one microphone".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite microphone position".into()));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::Config(format!("invalid speed of sound {speed_of_sound}")));
        }
        Ok(ArrayGeometry {
            positions,
            speed_of_sound,
        })
    }

    /// `n` mics evenly spaced on a horizontal circle, mic 0 at angle 0.
    pub fn circular(n: usize, radius: f64) -> Result<Self> {
        if n == 0 || !(radius > 0.0) {
            return Err(Error::Config(format!("circular array needs n >= 1 and radius > 0 (n={n}, r={radius})")));
        }
        let positions = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [radius * a.cos(), radius * a.sin(), 0.0]
            })
            .collect();
        Self::new(positions)
    }

    pub fn num_mics(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.positions[i], &self.positions[j])
    }

    /// Far-field arrival time at `mic` relative to the array origin.
    pub fn toa(&self, theta: f64, mic: usize) -> f64 {
        let p = &self.positions[mic];
        let u = direction(theta);
        -(p[0] * u[0] + p[1] * u[1] + p[2] * u[2]) / self.speed_of_sound
    }

    /// Entry `i` is `exp(-j 2 pi f (t_i - t_0))`.
    pub fn steering_vector(&self, theta: f64, frequency: f64) -> SteeringVector {
        let t0 = self.toa(theta, 0);
        let entries = (0..self.num_mics())
            .map(|i| {
                if i == 0 {
                    return Complex64::new(1.0, 0.0);
                }
                let phase = -2.0 * std::f64::consts::PI * frequency * (self.toa(theta, i) - t0);
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        SteeringVector { frequency, entries }
    }

    /// Steering vectors for every bin of an `fft_size`-point real transform.
    pub fn steering_bins(&self, theta: f64, fft_size: usize, sample_rate: f64) -> Vec<SteeringVector> {
        (0..=fft_size / 2)
            .map(|k| self.steering_vector(theta, k as f64 * sample_rate / fft_size as f64))
            .collect()
    }

    /// Rotate the whole layout about the z axis.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        ArrayGeometry {
            positions: self
                .positions
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
                .collect(),
            speed_of_sound: self.speed_of_sound,
        }
    }

    pub fn from_layout(layout: &ArrayLayout) -> Result<Self> {
        match layout {
            ArrayLayout::Preset {
                preset,
                n,
                radius,
                speed_of_sound,
            } => {
                if preset != "circular" {
                    return Err(Error::Config(format!("unknown array preset `{preset}`")));
                }
                let g = Self::circular(*n, *radius)?;
                Self::with_speed(g.positions, speed_of_sound.unwrap_or(DEFAULT_SPEED_OF_SOUND))
            }
            ArrayLayout::Positions {
                positions,
                speed_of_sound,
            } => Self::with_speed(positions.clone(), speed_of_sound.unwrap_or(DEFAULT_SPEED_OF_SOUND)),
        }
    }
}

/// Array layout as written in a config file: either
/// `{ preset = "circular", n = 6, radius = 0.05 }` or
/// `{ positions = [[x, y, z], ...] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ArrayLayout {
    Preset {
        preset: String,
        n: usize,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed_of_sound: Option<f64>,
    },
    Positions {
        positions: Vec<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed_of_sound: Option<f64>,
    },
}

impl Default for ArrayLayout {
    fn default() -> Self {
        ArrayLayout::Preset {
            preset: "circular".into(),
            n: 6,
            radius: 0.05,
            speed_of_sound: None,
        }
    }
}

pub fn direction(theta: f64) -> [f64; 3] {
    [theta.cos(), theta.sin(), 0.0]
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w >= std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}
