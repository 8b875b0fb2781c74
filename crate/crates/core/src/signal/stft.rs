//! Short-time Fourier transform with weighted overlap-add resynthesis.
//!
//! Frame `m` covers samples `[m*hop - (n - hop), (m + 1)*hop)`: the frame that
//! ends with block `m`. The same window is used for analysis and synthesis,
//! so the pair must satisfy constant overlap-add on the squared window.

use num_complex::Complex;

use super::fft::FftPlan;
use super::MultichannelBuffer;
use crate::{Error, Real, Result};

/// One frame of one channel: bins `0..=n/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T = f64> {
    pub bins: Vec<Complex<T>>,
    pub frame_index: usize,
    pub fft_size: usize,
}

/// Periodic square-root Hann window.
pub fn sqrt_hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let h = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            T::cst(h.sqrt())
        })
        .collect()
}

/// Validated STFT framing.
#[derive(Clone, Debug)]
pub struct StftConfig<T> {
    fft_size: usize,
    hop: usize,
    window: Vec<T>,
    /// `1 / sum_m w^2[k + m*hop]`
    ola_gain: T,
    plan: FftPlan<T>,
}

impl<T: Real> StftConfig<T> {
    pub fn new(fft_size: usize, hop: usize, window: Vec<T>) -> Result<Self> {
        let plan = FftPlan::new(fft_size)?;
        if hop == 0 || fft_size % hop != 0 {
            return Err(Error::Config(format!("hop {hop} does not divide fft size {fft_size}")));
        }
        if window.len() != fft_size {
            return Err(Error::Config(format!(
                "window length {} != fft size {fft_size}",
                window.len()
            )));
        }
        let sums: Vec<f64> = (0..hop)
            .map(|k| {
                (k..fft_size)
                    .step_by(hop)
                    .map(|i| window[i].as_f64().powi(2))
                    .sum()
            })
            .collect();
        let s0 = sums[0];
        if s0 <= 0.0 || sums.iter().any(|s| (s - s0).abs() > 1e-9 * s0.max(1.0)) {
            return Err(Error::Config(format!(
                "window/hop pair (n={fft_size}, hop={hop}) is not constant overlap-add"
            )));
        }
        Ok(StftConfig {
            fft_size,
            hop,
            window,
            ola_gain: T::cst(1.0 / s0),
            plan,
        })
    }

    /// Square-root Hann analysis and synthesis.
    pub fn sqrt_hann(fft_size: usize, hop: usize) -> Result<Self> {
        Self::new(fft_size, hop, sqrt_hann(fft_size))
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames needed so every sample of a `len`-sample signal is fully covered.
    pub fn num_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop) + self.fft_size / self.hop - 1
    }

    fn frame_start(&self, m: usize) -> isize {
        (m * self.hop) as isize - (self.fft_size - self.hop) as isize
    }

    /// Window and transform one frame of samples.
    pub fn analyze(&self, frame: &[T], scratch: &mut Vec<Complex<T>>) -> Vec<Complex<T>> {
        let windowed: Vec<T> = frame.iter().zip(&self.window).map(|(&x, &w)| x * w).collect();
        self.plan.forward_real(&windowed, scratch)
    }

    /// Inverse-transform one frame and apply the synthesis window and OLA gain.
    pub fn synthesize(&self, bins: &[Complex<T>], scratch: &mut Vec<Complex<T>>, out: &mut [T]) {
        self.plan.inverse_real(bins, scratch, out);
        for (o, &w) in out.iter_mut().zip(&self.window) {
            *o = *o * w * self.ola_gain;
        }
    }
}

/// Whole-signal STFT, one frame sequence per channel.
pub fn stft<T: Real>(buffer: &MultichannelBuffer<T>, config: &StftConfig<T>) -> Vec<Vec<Spectrum<T>>> {
    let n = config.fft_size;
    let frames = config.num_frames(buffer.len());
    let mut scratch = Vec::with_capacity(n);
    let mut frame = vec![T::zero(); n];
    buffer
        .channels()
        .iter()
        .map(|x| {
            (0..frames)
                .map(|m| {
                    let start = config.frame_start(m);
                    for (i, f) in frame.iter_mut().enumerate() {
                        let idx = start + i as isize;
                        *f = if idx >= 0 && (idx as usize) < x.len() {
                            x[idx as usize]
                        } else {
                            T::zero()
                        };
                    }
                    Spectrum {
                        bins: config.analyze(&frame, &mut scratch),
                        frame_index: m,
                        fft_size: n,
                    }
                })
                .collect()
        })
        .collect()
}

/// Overlap-add resynthesis of one channel to `len` samples.
pub fn istft<T: Real>(frames: &[Spectrum<T>], config: &StftConfig<T>, len: usize) -> Vec<T> {
    let n = config.fft_size;
    let mut out = vec![T::zero(); len];
    let mut scratch = Vec::with_capacity(n);
    let mut buf = vec![T::zero(); n];
    for f in frames {
        config.synthesize(&f.bins, &mut scratch, &mut buf);
        let start = config.frame_start(f.frame_index);
        for (i, &v) in buf.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < len {
                out[idx as usize] += v;
            }
        }
    }
    out
}

/// Block-wise analysis for one channel: each `hop`-sample block yields the
/// frame ending with that block.
#[derive(Clone, Debug)]
pub struct StreamingAnalysis<T> {
    history: Vec<T>,
    frame: Vec<T>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> StreamingAnalysis<T> {
    pub fn new(config: &StftConfig<T>) -> Self {
        StreamingAnalysis {
            history: vec![T::zero(); config.fft_size - config.hop],
            frame: vec![T::zero(); config.fft_size],
            scratch: Vec::with_capacity(config.fft_size),
        }
    }

    pub fn push(&mut self, config: &StftConfig<T>, block: &[T]) -> Vec<Complex<T>> {
        assert_eq!(block.len(), config.hop, "analysis block length");
        let h = self.history.len();
        self.frame[..h].copy_from_slice(&self.history);
        self.frame[h..].copy_from_slice(block);
        let bins = config.analyze(&self.frame, &mut self.scratch);
        self.history.copy_from_slice(&self.frame[config.hop..]);
        bins
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|x| *x = T::zero());
    }
}

/// Block-wise overlap-add: each frame completes the `hop` samples at the
/// start of its window, i.e. output lags input by `fft_size - hop` samples.
#[derive(Clone, Debug)]
pub struct StreamingSynthesis<T> {
    tail: Vec<T>,
    buf: Vec<T>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> StreamingSynthesis<T> {
    pub fn new(config: &StftConfig<T>) -> Self {
        StreamingSynthesis {
            tail: vec![T::zero(); config.fft_size - config.hop],
            buf: vec![T::zero(); config.fft_size],
            scratch: Vec::with_capacity(config.fft_size),
        }
    }

    pub fn push(&mut self, config: &StftConfig<T>, bins: &[Complex<T>], out: &mut [T]) {
        let hop = config.hop;
        assert_eq!(out.len(), hop, "synthesis block length");
        config.synthesize(bins, &mut self.scratch, &mut self.buf);
        let t = self.tail.len();
        for i in 0..hop {
            let prev = if i < t { self.tail[i] } else { T::zero() };
            out[i] = prev + self.buf[i];
        }
        for i in 0..t {
            let prev = if i + hop < t { self.tail[i + hop] } else { T::zero() };
            self.tail[i] = prev + self.buf[i + hop];
        }
    }

    pub fn reset(&mut self) {
        self.tail.iter_mut().for_each(|x| *x = T::zero());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn silence_gives_zero_spectra() {
        let cfg = StftConfig::<f64>::sqrt_hann(256, 128).unwrap();
        let buf = MultichannelBuffer::<f64>::zeros(2, 1000);
        for ch in stft(&buf, &cfg) {
            for f in ch {
                assert!(f.bins.iter().all(|b| b.norm() == 0.0));
                assert_eq!(f.bins.len(), 129);
            }
        }
    }

    #[test]
    fn roundtrip_white_noise_one_second() {
        for &(n, hop) in &[(256usize, 128usize), (256, 64), (512, 128)] {
            let cfg = StftConfig::<f64>::sqrt_hann(n, hop).unwrap();
            let x = noise(16_000, 3);
            let buf = MultichannelBuffer::new(vec![x.clone()]).unwrap();
            let spec = stft(&buf, &cfg);
            let y = istft(&spec[0], &cfg, x.len());
            let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let en: f64 = x.iter().map(|a| a * a).sum();
            assert!((err / en).sqrt() < 1e-8, "n={n} hop={hop}");
        }
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let cfg = StftConfig::<f64>::sqrt_hann(256, 128).unwrap();
        let x: Vec<f64> = (0..4096)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin())
            .collect();
        let spec = stft(&MultichannelBuffer::new(vec![x]).unwrap(), &cfg);
        let f = &spec[0][10];
        let peak = (0..f.bins.len())
            .max_by(|&a, &b| f.bins[a].norm().partial_cmp(&f.bins[b].norm()).unwrap())
            .unwrap();
        assert_eq!(peak, 16);
    }

    #[test]
    fn rejects_non_cola() {
        let rect = vec![1.0f64; 256];
        assert!(StftConfig::new(256, 96, rect.clone()).is_err());
        assert!(StftConfig::new(256, 128, sqrt_hann::<f64>(256).iter().map(|w| w * w).collect()).is_err());
        assert!(StftConfig::new(256, 256, rect).is_ok());
    }

    #[test]
    fn streaming_matches_offline_with_one_hop_delay() {
        let cfg = StftConfig::<f64>::sqrt_hann(256, 128).unwrap();
        let x = noise(128 * 20, 9);
        let mut ana = StreamingAnalysis::new(&cfg);
        let mut syn = StreamingSynthesis::new(&cfg);
        let mut y = Vec::new();
        let mut out = vec![0.0; 128];
        let offline = stft(&MultichannelBuffer::new(vec![x.clone()]).unwrap(), &cfg);
        for (m, block) in x.chunks(128).enumerate() {
            let bins = ana.push(&cfg, block);
            for (a, b) in bins.iter().zip(&offline[0][m].bins) {
                assert!((a - b).norm() < 1e-12);
            }
            syn.push(&cfg, &bins, &mut out);
            y.extend_from_slice(&out);
        }
        for t in 128..x.len() {
            assert!((y[t] - x[t - 128]).abs() < 1e-10);
        }
    }
}
