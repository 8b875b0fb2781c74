//! Iterative radix-2 FFT.
//!
//! Forward transforms are unnormalized; inverse transforms scale by `1/n`.

use num_complex::Complex;

use crate::{Error, Real, Result};

/// Precomputed twiddles and bit-reversal table for one power-of-two size.
#[derive(Clone, Debug)]
pub struct FftPlan<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<u32>,
}

impl<T: Real> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Config(format!("fft size {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        // twiddles[k] = exp(-2 pi j k / n), k < n/2, computed in f64
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::cst(a.cos()), T::cst(a.sin()))
            })
            .collect();
        Ok(FftPlan { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/n` scaling.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, true);
        let s = T::one() / T::cst(self.n as f64);
        for x in data.iter_mut() {
            *x = *x * s;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "fft buffer length");
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Forward transform of a real frame, returning the `n/2 + 1` non-negative bins.
    pub fn forward_real(&self, x: &[T], scratch: &mut Vec<Complex<T>>) -> Vec<Complex<T>> {
        scratch.clear();
        scratch.extend(x.iter().map(|&v| Complex::new(v, T::zero())));
        self.forward(scratch);
        scratch[..self.n / 2 + 1].to_vec()
    }

    /// Inverse of [`forward_real`](Self::forward_real): Hermitian-extends the
    /// half spectrum and returns the real part.
    pub fn inverse_real(&self, bins: &[Complex<T>], scratch: &mut Vec<Complex<T>>, out: &mut [T]) {
        let n = self.n;
        assert_eq!(bins.len(), n / 2 + 1);
        scratch.clear();
        scratch.extend_from_slice(bins);
        for k in n / 2 + 1..n {
            scratch.push(bins[n - k].conj());
        }
        // DC and Nyquist of a real signal are real
        scratch[0].im = T::zero();
        if n > 1 {
            scratch[n / 2].im = T::zero();
        }
        self.inverse(scratch);
        for (o, v) in out.iter_mut().zip(scratch.iter()) {
            *o = v.re;
        }
    }
}

/// Full linear convolution of two real sequences via zero-padded FFTs.
pub fn convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let plan = FftPlan::new(len.next_power_of_two()).expect("power of two");
    let pad = |x: &[T]| {
        let mut v = vec![Complex::new(T::zero(), T::zero()); plan.len()];
        for (d, s) in v.iter_mut().zip(x) {
            d.re = *s;
        }
        plan.forward(&mut v);
        v
    };
    let mut fa = pad(a);
    let fb = pad(b);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y;
    }
    plan.inverse(&mut fa);
    fa[..len].iter().map(|v| v.re).collect()
}

/// Forward DFT of `x` (length must equal `size`, a power of two).
pub fn fft<T: Real>(x: &[Complex<T>], size: usize) -> Result<Vec<Complex<T>>> {
    let plan = FftPlan::new(size)?;
    if x.len() != size {
        return Err(Error::Shape(format!("input length {} != fft size {size}", x.len())));
    }
    let mut v = x.to_vec();
    plan.forward(&mut v);
    Ok(v)
}

/// Inverse DFT with `1/size` scaling.
pub fn ifft<T: Real>(x: &[Complex<T>], size: usize) -> Result<Vec<Complex<T>>> {
    let plan = FftPlan::new(size)?;
    if x.len() != size {
        return Err(Error::Shape(format!("input length {} != fft size {size}", x.len())));
    }
    let mut v = x.to_vec();
    plan.inverse(&mut v);
    Ok(v)
}
