//! SI-SDR, SDR and the training objective, with gradients.

use crate::{Error, Real, Result};

/// SI-SDR and SDR values are clamped to this many dB either way.
pub const DB_CLAMP: f64 = 60.0;

const DB: f64 = 10.0 / std::f64::consts::LN_10;

fn check<T: Real>(est: &[T], reference: &[T]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::Shape(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let r2: f64 = reference.iter().map(|v| v.as_f64().powi(2)).sum();
    if r2 == 0.0 {
        return Err(Error::Input("reference signal is all zeros".into()));
    }
    Ok(r2)
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise <= 0.0 {
        return DB_CLAMP;
    }
    if signal <= 0.0 {
        return -DB_CLAMP;
    }
    (10.0 * (signal / noise).log10()).clamp(-DB_CLAMP, DB_CLAMP)
}

/// Scale-invariant signal-to-distortion ratio in dB, clamped to +-60.
pub fn si_sdr<T: Real>(est: &[T], reference: &[T]) -> Result<f64> {
    Ok(si_sdr_parts(est, reference)?.0)
}

/// `(si_sdr, d si_sdr / d est)`; the gradient is zero where the clamp is active.
pub fn si_sdr_grad<T: Real>(est: &[T], reference: &[T]) -> Result<(f64, Vec<f64>)> {
    let (v, p, r2, s, n) = si_sdr_parts(est, reference)?;
    let mut g = vec![0.0; est.len()];
    if v.abs() < DB_CLAMP && s > 0.0 && n > 0.0 {
        for (i, gi) in g.iter_mut().enumerate() {
            let (e, r) = (est[i].as_f64(), reference[i].as_f64());
            let ds = 2.0 * p * r / r2;
            let dn = 2.0 * e - ds;
            *gi = DB * (ds / s - dn / n);
        }
    }
    Ok((v, g))
}

fn si_sdr_parts<T: Real>(est: &[T], reference: &[T]) -> Result<(f64, f64, f64, f64, f64)> {
    let r2 = check(est, reference)?;
    let (mut p, mut e2) = (0.0, 0.0);
    for (e, r) in est.iter().zip(reference) {
        let (e, r) = (e.as_f64(), r.as_f64());
        p += e * r;
        e2 += e * e;
    }
    let s = p * p / r2;
    // residual energy of est after removing its projection onto the reference
    let n = (e2 - s).max(0.0);
    Ok((ratio_db(s, n), p, r2, s, n))
}

/// Plain energy-ratio SDR: `10 log10(|ref|^2 / |ref - est|^2)`, clamped.
pub fn sdr<T: Real>(est: &[T], reference: &[T]) -> Result<f64> {
    let r2 = check(est, reference)?;
    let d2: f64 = est.iter().zip(reference).map(|(e, r)| (r.as_f64() - e.as_f64()).powi(2)).sum();
    Ok(ratio_db(r2, d2))
}

/// Relative weights of the two objective terms.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub si_sdr: f64,
    pub l1: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { si_sdr: 1.0, l1: 10.0 }
    }
}

/// One evaluation of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    /// SI-SDR in dB (the objective uses its negative).
    pub si_sdr: f64,
    /// Mean absolute error.
    pub l1: f64,
}

/// `-w_si * si_sdr(est, ref) + w_l1 * mean|est - ref|`.
pub fn loss<T: Real>(est: &[T], reference: &[T], w: LossWeights) -> Result<LossValue> {
    let si = si_sdr(est, reference)?;
    let l1 = est.iter().zip(reference).map(|(e, r)| (e.as_f64() - r.as_f64()).abs()).sum::<f64>() / est.len() as f64;
    Ok(LossValue {
        total: -w.si_sdr * si + w.l1 * l1,
        si_sdr: si,
        l1,
    })
}

/// [`loss`] plus its gradient with respect to `est` (sign subgradient 0 at 0).
pub fn loss_grad<T: Real>(est: &[T], reference: &[T], w: LossWeights) -> Result<(LossValue, Vec<T>)> {
    let value = loss(est, reference, w)?;
    let (_, gsi) = si_sdr_grad(est, reference)?;
    let n = est.len() as f64;
    let g = est
        .iter()
        .zip(reference)
        .zip(&gsi)
        .map(|((e, r), gs)| {
            let d = e.as_f64() - r.as_f64();
            let sign = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            T::cst(-w.si_sdr * gs + w.l1 * sign / n)
        })
        .collect();
    Ok((value, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_and_scale_examples() {
        let r: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(si_sdr(&r, &r).unwrap(), 60.0);
        let half: Vec<f64> = r.iter().map(|v| 0.5 * v).collect();
        assert_eq!(si_sdr(&half, &r).unwrap(), 60.0);
        assert!(si_sdr(&r, &vec![0.0; 100]).is_err());
        assert!(si_sdr(&r[..10], &r).is_err());
        let v = loss(&r, &r, LossWeights::default()).unwrap();
        assert_eq!(v.total, -60.0);
    }

    #[test]
    fn orthogonal_residual_gives_ten_db() {
        let n = 64;
        let r: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        // e lives on the odd samples, energy |r|^2 / 10
        let amp = (32.0f64 / 10.0 / 32.0).sqrt();
        let est: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { amp }).collect();
        assert!((si_sdr(&est, &r).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn loss_arithmetic() {
        // si_sdr -10 dB and L1 0.2 give 10 + 2
        let w = LossWeights::default();
        assert!((-w.si_sdr * -10.0 + w.l1 * 0.2 - 12.0f64).abs() < 1e-12);
    }
}
