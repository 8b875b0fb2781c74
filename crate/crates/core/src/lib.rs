//! Directional hearing engine.
//!
//! A multichannel microphone mixture and a look direction go in; the speech
//! arriving from that direction comes out, 128 samples at a time. Three cheap
//! statistical beamformers (superdirective, online MVDR and a masking
//! delay-and-sum) run first, their outputs are stacked with the
//! direction-aligned microphone channels, and a small complex-valued temporal
//! convolutional network turns that stack into the separated signal.
//!
//! Layout:
//!
//! - [`signal`]: buffers, FFT, STFT, WAV I/O
//! - [`geometry`]: microphone layouts, arrival times, steering vectors
//! - [`beamformer`]: channel alignment and the three pre-beamformers
//! - [`room`]: image-source room simulation and the synthetic scene recipe
//! - [`nn`]: the complex network, its weights, checkpoints and architecture arithmetic
//! - [`stream`]: block-by-block engine, cache accounting and latency bench
//! - [`train`]: tape-based gradients, SI-SDR objective, Adam, training and evaluation
//! - [`config`]: the engine configuration file

pub mod beamformer;
pub mod config;
mod error;
pub mod real;
pub mod geometry;
pub mod linalg;
pub mod nn;
pub mod room;
pub mod signal;
pub mod stream;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;

/// Sample rate used everywhere in the pipeline.
pub const SAMPLE_RATE: u32 = 16_000;

/// Streaming block size in samples (8 ms).
pub const BLOCK_SIZE: usize = 128;
