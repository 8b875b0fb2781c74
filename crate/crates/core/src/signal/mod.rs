//! Audio and spectral primitives.

mod buffer;
pub mod fft;
pub mod stft;
pub mod wav;

pub use buffer::MultichannelBuffer;
pub use fft::{convolve, fft, ifft, FftPlan};
pub use stft::{istft, sqrt_hann, stft, Spectrum, StftConfig, StreamingAnalysis, StreamingSynthesis};
