use num_complex::Complex64;

use crate::geometry::SteeringVector;
use crate::linalg::{dot_h, CMatrix};
use crate::Result;

/// Recursive per-bin mixture covariance for the online MVDR beamformer.
#[derive(Clone, Debug, PartialEq)]
pub struct MvdrState {
    covariances: Vec<CMatrix>,
    forgetting_factor: f64,
    /// Loading relative to `trace(R) / c`.
    relative_loading: f64,
    frames_seen: u64,
}

/// Absolute loading floor so an all-zero covariance still solves (giving delay-and-sum).
const MIN_LOADING: f64 = 1e-12;

impl MvdrState {
    pub fn new(num_mics: usize, num_bins: usize, forgetting_factor: f64, relative_loading: f64) -> Self {
        MvdrState {
            covariances: vec![CMatrix::zeros(num_mics); num_bins],
            forgetting_factor,
            relative_loading,
            frames_seen: 0,
        }
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn covariance(&self, bin: usize) -> &CMatrix {
        &self.covariances[bin]
    }

    pub fn num_bins(&self) -> usize {
        self.covariances.len()
    }

    /// `R(f) <- lambda R(f) + (1 - lambda) y(f) y(f)^H` for every bin.
    pub fn update(&mut self, spectra: &[Vec<Complex64>]) {
        let lambda = self.forgetting_factor;
        let c = spectra.len();
        let mut y = vec![Complex64::new(0.0, 0.0); c];
        for (k, r) in self.covariances.iter_mut().enumerate() {
            for (i, ch) in spectra.iter().enumerate() {
                y[i] = ch[k];
            }
            // only the upper triangle is accumulated; the lower one is mirrored so R stays exactly Hermitian
            for i in 0..c {
                for j in i..c {
                    let v = r[(i, j)] * lambda + y[i] * y[j].conj() * (1.0 - lambda);
                    r[(i, j)] = if i == j { Complex64::new(v.re, 0.0) } else { v };
                    if i != j {
                        r[(j, i)] = v.conj();
                    }
                }
            }
        }
        self.frames_seen += 1;
    }

    pub fn loading(&self, bin: usize) -> f64 {
        let r = &self.covariances[bin];
        (self.relative_loading * r.trace().re / r.dim() as f64).max(MIN_LOADING)
    }

    /// Current per-bin weights toward the given steering vectors.
    pub fn weights(&self, steering: &[SteeringVector]) -> Result<Vec<Vec<Complex64>>> {
        (0..self.covariances.len())
            .map(|k| mvdr_weights(&self.covariances[k], self.loading(k), &steering[k].entries))
            .collect()
    }

    /// `w^H y` per bin using the current covariance.
    pub fn process(&self, spectra: &[Vec<Complex64>], steering: &[SteeringVector]) -> Result<Vec<Complex64>> {
        let w = self.weights(steering)?;
        Ok(w
            .iter()
            .enumerate()
            .map(|(k, wk)| wk.iter().zip(spectra).map(|(w, ch)| w.conj() * ch[k]).sum())
            .collect())
    }
}

/// `w = (R + delta I)^-1 d / (d^H (R + delta I)^-1 d)`.
pub fn mvdr_weights(r: &CMatrix, delta: f64, d: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut a = r.clone();
    a.add_diagonal(delta);
    let x = a.cholesky_solve(d)?;
    let denom = dot_h(d, &x);
    Ok(x.into_iter().map(|v| v / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayGeometry;

    fn frame(c: usize, bins: usize, seed: f64) -> Vec<Vec<Complex64>> {
        (0..c)
            .map(|i| {
                (0..bins)
                    .map(|k| Complex64::new((seed + i as f64 * 1.3 + k as f64 * 0.7).sin(), (seed * 2.0 + i as f64 - k as f64).cos()))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn lambda_one_keeps_state() {
        let mut s = MvdrState::new(3, 4, 1.0, 1e-3);
        s.update(&frame(3, 4, 0.1));
        let before = s.covariances.clone();
        s.update(&frame(3, 4, 0.9));
        assert_eq!(before, s.covariances);
    }

    #[test]
    fn constant_frame_converges_to_outer_product() {
        let mut s = MvdrState::new(3, 2, 0.9, 1e-3);
        let y = frame(3, 2, 0.4);
        for _ in 0..400 {
            s.update(&y);
        }
        for k in 0..2 {
            let yk: Vec<Complex64> = (0..3).map(|i| y[i][k]).collect();
            let target = CMatrix::outer(&yk);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((s.covariance(k)[(i, j)] - target[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_step_unroll() {
        let lambda = 0.95;
        let mut s = MvdrState::new(2, 1, lambda, 1e-3);
        let y1 = frame(2, 1, 0.2);
        let y2 = frame(2, 1, 1.7);
        s.update(&y1);
        s.update(&y2);
        let v1: Vec<Complex64> = (0..2).map(|i| y1[i][0]).collect();
        let v2: Vec<Complex64> = (0..2).map(|i| y2[i][0]).collect();
        for i in 0..2 {
            for j in 0..2 {
                let expect = (v1[i] * v1[j].conj()) * (lambda * (1.0 - lambda)) + (v2[i] * v2[j].conj()) * (1.0 - lambda);
                assert!((s.covariance(0)[(i, j)] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn white_covariance_gives_delay_and_sum() {
        let g = ArrayGeometry::circular(6, 0.05).unwrap();
        let d = g.steering_vector(0.5, 2000.0);
        let mut r = CMatrix::identity(6);
        r.blend(2.5, 0.0, &CMatrix::zeros(6));
        let w = mvdr_weights(&r, 1e-3 * 2.5, &d.entries).unwrap();
        for (wi, di) in w.iter().zip(&d.entries) {
            assert!((wi - di / 6.0).norm() < 1e-12);
        }
    }
}
