use num_complex::Complex;

use crate::{Error, Real, Result};

/// `channels x frames` complex activations stored as stacked real rows:
/// rows `0..C` hold real parts, rows `C..2C` imaginary parts, each row
/// `frames` long.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor<T> {
    channels: usize,
    frames: usize,
    data: Vec<T>,
}

impl<T: Real> ComplexTensor<T> {
    pub fn zeros(channels: usize, frames: usize) -> Self {
        ComplexTensor {
            channels,
            frames,
            data: vec![T::zero(); 2 * channels * frames],
        }
    }

    pub fn from_stacked(channels: usize, frames: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 2 * channels * frames {
            return Err(Error::Shape(format!(
                "stacked data of {} values cannot hold {channels}x{frames} complex",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("complex tensor values must be finite".into()));
        }
        Ok(ComplexTensor { channels, frames, data })
    }

    pub fn from_fn(channels: usize, frames: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut t = Self::zeros(channels, frames);
        for c in 0..channels {
            for j in 0..frames {
                t.set(c, j, f(c, j));
            }
        }
        t
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.frames)
    }

    pub fn get(&self, c: usize, t: usize) -> Complex<T> {
        Complex::new(
            self.data[c * self.frames + t],
            self.data[(self.channels + c) * self.frames + t],
        )
    }

    pub fn set(&mut self, c: usize, t: usize, v: Complex<T>) {
        self.data[c * self.frames + t] = v.re;
        self.data[(self.channels + c) * self.frames + t] = v.im;
    }

    pub fn stacked(&self) -> &[T] {
        &self.data
    }

    pub fn stacked_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_stacked(self) -> Vec<T> {
        self.data
    }

    /// Elementwise complex product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let mut out = Self::zeros(self.channels, self.frames);
        super::ops::cmul(&self.data, &other.data, &mut out.data, self.channels * self.frames);
        Ok(out)
    }
}
