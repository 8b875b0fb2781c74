use num_complex::Complex64;

use crate::geometry::{ArrayGeometry, SteeringVector};
use crate::linalg::{dot_h, CMatrix};
use crate::Result;

/// Spherically isotropic noise coherence: `sinc(2 pi f |p_i - p_j| / c)`.
pub fn diffuse_coherence(geometry: &ArrayGeometry, frequency: f64) -> CMatrix {
    let c = geometry.speed_of_sound();
    CMatrix::from_fn(geometry.num_mics(), |i, j| {
        let x = 2.0 * std::f64::consts::PI * frequency * geometry.distance(i, j) / c;
        let s = if x == 0.0 { 1.0 } else { x.sin() / x };
        Complex64::new(s, 0.0)
    })
}

/// Per-bin superdirective weights for one look direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperdirectiveWeights {
    pub weights: Vec<Vec<Complex64>>,
    pub diagonal_loading: f64,
}

impl SuperdirectiveWeights {
    /// `w^H y` per bin for one frame of raw spectra.
    pub fn apply(&self, spectra: &[Vec<Complex64>]) -> Vec<Complex64> {
        (0..self.weights.len())
            .map(|k| {
                self.weights[k]
                    .iter()
                    .zip(spectra)
                    .map(|(w, ch)| w.conj() * ch[k])
                    .sum()
            })
            .collect()
    }
}

/// `w = (G + eps I)^-1 d / (d^H (G + eps I)^-1 d)` for every bin of an
/// `fft_size`-point transform at 16 kHz.
pub fn superdirective_design(
    geometry: &ArrayGeometry,
    theta: f64,
    fft_size: usize,
    epsilon: f64,
) -> Result<SuperdirectiveWeights> {
    let steering = geometry.steering_bins(theta, fft_size, crate::SAMPLE_RATE as f64);
    superdirective_from_steering(geometry, &steering, epsilon)
}

pub(crate) fn superdirective_from_steering(
    geometry: &ArrayGeometry,
    steering: &[SteeringVector],
    epsilon: f64,
) -> Result<SuperdirectiveWeights> {
    let weights = steering
        .iter()
        .map(|d| {
            let mut g = diffuse_coherence(geometry, d.frequency);
            g.add_diagonal(epsilon);
            let x = g.cholesky_solve(&d.entries)?;
            let denom = dot_h(&d.entries, &x);
            Ok(x.into_iter().map(|v| v / denom).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuperdirectiveWeights {
        weights,
        diagonal_loading: epsilon,
    })
}

/// Noise power gain `w^H G w` of weights `w` under diffuse noise at `frequency`.
pub fn diffuse_noise_gain(geometry: &ArrayGeometry, w: &[Complex64], frequency: f64) -> f64 {
    diffuse_coherence(geometry, frequency).quad_form(w).re
}
