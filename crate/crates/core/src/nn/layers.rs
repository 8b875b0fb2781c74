//! Tensor-level entry points for the individual network operations.
//!
//! These take and return [`ComplexTensor`]s and do no implicit padding; the
//! whole-network paths in [`super::graph`] and the streaming engine supply
//! causal history themselves.

use super::graph::{self, Graph};
use super::ops::{self, ConvGeom, NormMode, NormState, TRelu};
use super::{ComplexTensor, ModelConfig, ModelWeights};
use crate::{Error, Real, Result};

/// A complex 1-D convolution with its own weights (`out x in x kernel`).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub stride: usize,
    pub weight_re: Vec<T>,
    pub weight_im: Vec<T>,
    pub bias_re: Vec<T>,
    pub bias_im: Vec<T>,
}

impl<T: Real> ComplexConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize, stride: usize) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 || dilation == 0 || stride == 0 {
            return Err(Error::Config("conv dimensions must be positive".into()));
        }
        let n = out_channels * in_channels * kernel_size;
        Ok(ComplexConvLayer {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            stride,
            weight_re: vec![T::zero(); n],
            weight_im: vec![T::zero(); n],
            bias_re: vec![T::zero(); out_channels],
            bias_im: vec![T::zero(); out_channels],
        })
    }

    /// Span of one output frame in input frames.
    pub fn span(&self) -> usize {
        (self.kernel_size - 1) * self.dilation + 1
    }

    pub fn weight_index(&self, o: usize, i: usize, kk: usize) -> usize {
        (o * self.in_channels + i) * self.kernel_size + kk
    }

    /// Valid-mode complex cross-correlation; the caller supplies causal history.
    pub fn forward(&self, input: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        if input.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "conv expects {} channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        let g = ConvGeom {
            rows_out: 2 * self.out_channels,
            rows_in: 2 * self.in_channels,
            kernel: self.kernel_size,
            dilation: self.dilation,
            stride: self.stride,
            pad: 0,
        };
        let frames = g.frames_out(input.frames());
        let packed = ops::pack_complex(&self.weight_re, &self.weight_im, self.out_channels, self.in_channels, self.kernel_size);
        let mut y = vec![T::zero(); 2 * self.out_channels * frames];
        ops::add_bias(&mut y, self.out_channels, frames, &self.bias_re, &self.bias_im);
        ops::conv_forward(&packed, g, input.stacked(), input.frames(), &mut y, frames, frames);
        ComplexTensor::from_stacked(self.out_channels, frames, y)
    }
}

pub fn trelu<T: Real>(params: &[TRelu<T>], input: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    if params.len() != input.channels() {
        return Err(Error::Shape(format!(
            "{} TReLU parameter sets for {} channels",
            params.len(),
            input.channels()
        )));
    }
    let (c, f) = input.shape();
    let x = input.stacked();
    let mut y = vec![T::zero(); 2 * c * f];
    for (ch, p) in params.iter().enumerate() {
        for t in 0..f {
            let (a, b) = p.apply(x[ch * f + t], x[(c + ch) * f + t]);
            y[ch * f + t] = a;
            y[(c + ch) * f + t] = b;
        }
    }
    ComplexTensor::from_stacked(c, f, y)
}

pub fn ctanh<T: Real>(input: &ComplexTensor<T>) -> ComplexTensor<T> {
    let (c, f) = input.shape();
    let mut out = ComplexTensor::zeros(c, f);
    ops::ctanh_forward(input.stacked(), c * f, out.stacked_mut());
    out
}

/// Normalize each channel by `sqrt(E|x|^2 + eps)`, then apply the complex
/// scale `gamma` and shift `beta` (one complex value per channel each).
pub fn complex_norm<T: Real>(
    gamma: (&[T], &[T]),
    beta: (&[T], &[T]),
    input: &ComplexTensor<T>,
    eps: f64,
    mode: NormMode,
    state: &mut NormState,
) -> Result<ComplexTensor<T>> {
    let (c, f) = input.shape();
    if [gamma.0.len(), gamma.1.len(), beta.0.len(), beta.1.len(), state.sums.len()]
        .iter()
        .any(|&n| n != c)
    {
        return Err(Error::Shape(format!("norm parameters do not match {c} channels")));
    }
    let mut out = ComplexTensor::zeros(c, f);
    ops::norm_forward(input.stacked(), c, f, gamma, beta, eps, mode, state, out.stacked_mut());
    Ok(out)
}

/// Valid-mode real-to-complex encoder over `input` rows of equal length:
/// `(T - kernel) / stride + 1` frames.
pub fn encoder_forward<T: Real, R: AsRef<[T]>>(weights: &ModelWeights<T>, input: &[R]) -> Result<ComplexTensor<T>> {
    let cfg = weights.config();
    if input.len() != cfg.input_channels() {
        return Err(Error::Shape(format!(
            "encoder expects {} channels, got {}",
            cfg.input_channels(),
            input.len()
        )));
    }
    let len = input[0].as_ref().len();
    if input.iter().any(|r| r.as_ref().len() != len) {
        return Err(Error::Shape("encoder input channels differ in length".into()));
    }
    let c = cfg.encoder_channels;
    let g = ConvGeom {
        rows_out: 2 * c,
        rows_in: input.len(),
        kernel: cfg.encoder_kernel,
        dilation: 1,
        stride: cfg.encoder_stride,
        pad: 0,
    };
    let frames = g.frames_out(len);
    let x: Vec<T> = input.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
    let packed = ops::pack_real(weights.tensor(weights.layout().encoder), 2 * c, input.len(), cfg.encoder_kernel);
    let mut y = vec![T::zero(); 2 * c * frames];
    ops::conv_forward(&packed, g, &x, len, &mut y, frames, frames);
    ComplexTensor::from_stacked(c, frames, y)
}

/// Mask for a latent sequence (causal, cumulative normalization statistics).
pub fn separator_forward<T: Real>(weights: &ModelWeights<T>, latent: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    let cfg = weights.config();
    if latent.channels() != cfg.encoder_channels {
        return Err(Error::Shape(format!(
            "separator expects {} channels, got {}",
            cfg.encoder_channels,
            latent.channels()
        )));
    }
    let (c, f) = latent.shape();
    let mut g = Graph::new(false, cfg.norm_epsilon);
    let x = g.input(2 * c, f, latent.stacked().to_vec())?;
    let mask = graph::separator(&mut g, weights, x)?;
    ComplexTensor::from_stacked(c, f, g.take(mask))
}

pub fn apply_mask<T: Real>(latent: &ComplexTensor<T>, mask: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    latent.mul(mask)
}

/// Transposed-convolution decoder; `F` frames give `F * stride` samples
/// aligned with the encoder input (frame `j` writes from `stride*j - offset`).
pub fn decoder_forward<T: Real>(weights: &ModelWeights<T>, masked: &ComplexTensor<T>) -> Result<Vec<T>> {
    let cfg = weights.config();
    let (c, f) = masked.shape();
    if c != cfg.encoder_channels {
        return Err(Error::Shape(format!("decoder expects {} channels, got {c}", cfg.encoder_channels)));
    }
    let id = weights.layout().decoder;
    let basis = ops::decoder_basis(weights.re(id), weights.im(id), c, cfg.encoder_kernel);
    let contrib = ops::decoder_frames(&basis, c, cfg.encoder_kernel, masked.stacked(), f);
    let mut z = vec![T::zero(); f * cfg.encoder_stride];
    ops::overlap_add(&contrib, cfg.encoder_kernel, f, cfg.encoder_stride, cfg.decoder_offset(), &mut z);
    Ok(z)
}

/// Receptive field in seconds.
pub fn receptive_field(config: &ModelConfig) -> f64 {
    config.receptive_field()
}

/// Run the full network offline on `input` rows (any length; padded up to
/// the encoder stride and trimmed back).
pub fn separate_offline<T: Real, R: AsRef<[T]>>(weights: &ModelWeights<T>, input: &[R]) -> Result<Vec<T>> {
    let cfg = weights.config();
    if input.len() != cfg.input_channels() {
        return Err(Error::Shape(format!(
            "network expects {} channels, got {}",
            cfg.input_channels(),
            input.len()
        )));
    }
    let len = input.first().map_or(0, |r| r.as_ref().len());
    let padded = len.div_ceil(cfg.encoder_stride) * cfg.encoder_stride;
    let mut x = vec![T::zero(); input.len() * padded];
    for (r, row) in input.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != len {
            return Err(Error::Shape("network input channels differ in length".into()));
        }
        x[r * padded..r * padded + len].copy_from_slice(row);
    }
    if padded == 0 {
        return Ok(Vec::new());
    }
    let (mut g, out) = graph::forward(weights, x, padded, false)?;
    let mut z = g.take(out.output);
    z.truncate(len);
    Ok(z)
}
