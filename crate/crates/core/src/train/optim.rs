//! Adam with global gradient-norm clipping, and its state blob.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::weights::write_atomic;
use crate::{Error, Real, Result};

const OPT_MAGIC: &[u8; 8] = b"DIRHOPT1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the whole gradient when its L2 norm exceeds this (0 disables).
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

/// Moments and step count. Complex parameters are updated component-wise
/// because the flat vector stores real and imaginary parts separately.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            step: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: &[u64]) -> Result<()> {
        let mut bytes = Vec::with_capacity(32 + 8 * self.m.len());
        bytes.extend_from_slice(OPT_MAGIC);
        bytes.extend_from_slice(&self.step.to_le_bytes());
        bytes.extend_from_slice(&(extra.len() as u32).to_le_bytes());
        for e in extra {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        bytes.extend_from_slice(&(self.m.len() as u64).to_le_bytes());
        for v in self.m.iter().chain(&self.v) {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        write_atomic(path.as_ref(), &bytes)
    }

    /// Load moments written by [`Self::save`]; returns the extra words too.
    pub fn load(path: impl AsRef<Path>, len: usize) -> Result<(Self, Vec<u64>)> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let err = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| err("truncated optimizer state"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != OPT_MAGIC {
            return Err(err("bad optimizer magic"));
        }
        let step = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n_extra = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut extra = Vec::with_capacity(n_extra);
        for _ in 0..n_extra {
            extra.push(u64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n != len {
            return Err(err(&format!("optimizer state has {n} slots, model has {len}")));
        }
        let mut vals = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            vals.push(T::cst(f32::from_le_bytes(take(4)?.try_into().unwrap()) as f64));
        }
        if pos != bytes.len() {
            return Err(err("trailing bytes in optimizer state"));
        }
        let v = vals.split_off(n);
        Ok((AdamState { step, m: vals, v }, extra))
    }
}

/// L2 norm of a gradient vector.
pub fn grad_norm<T: Real>(g: &[T]) -> f64 {
    g.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
}

/// One Adam update with bias correction; clips `grads` in place first.
/// Returns the gradient norm before clipping.
pub fn adam_step<T: Real>(params: &mut [T], grads: &mut [T], state: &mut AdamState<T>, cfg: &AdamConfig) -> Result<f64> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    let norm = grad_norm(grads);
    if !norm.is_finite() {
        return Err(Error::Input("non-finite gradient".into()));
    }
    if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
        let s = T::cst(cfg.clip_norm / norm);
        grads.iter_mut().for_each(|g| *g *= s);
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::cst(cfg.beta1), T::cst(cfg.beta2));
    let c1 = 1.0 / (1.0 - cfg.beta1.powi(t));
    let c2 = 1.0 / (1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (T::cst(cfg.lr), T::cst(cfg.eps));
    let (c1, c2) = (T::cst(c1), T::cst(c2));
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let mh = state.m[i] * c1;
        let vh = state.v[i] * c2;
        params[i] -= lr * mh / (vh.sqrt() + eps);
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f64, -2.0, 3.0];
        let mut g = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &mut g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut p = vec![0.0f64; 4];
        let mut g = vec![0.5, -0.25, 2.0, -1.0];
        let mut s = AdamState::new(4);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &mut g, &mut s, &cfg).unwrap();
        for (pi, gi) in p.iter().zip([0.5, -0.25, 2.0, -1.0]) {
            // m_hat = g, v_hat = g^2
            assert!((pi + cfg.lr * f64::signum(gi)).abs() < 1e-7, "{pi}");
        }
    }

    #[test]
    fn clipping_rescales_to_norm() {
        let mut p = vec![0.0f64; 2];
        let mut g = vec![30.0, 40.0];
        let mut s = AdamState::new(2);
        let n = adam_step(&mut p, &mut g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(n, 50.0);
        assert!((grad_norm(&g) - 5.0).abs() < 1e-12);
    }
}
