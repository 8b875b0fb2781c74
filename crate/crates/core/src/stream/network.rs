//! The network in block form: packed weights plus per-layer ring caches.

use crate::nn::ops::{self, ConvGeom, NormMode, NormState};
use crate::nn::weights::{ConvSpec, LayerSpec};
use crate::nn::{ModelConfig, ModelWeights};
use crate::{Real, BLOCK_SIZE};

/// Column ring with a mirrored second half, so the newest `cap` columns are
/// always one contiguous strided window and nothing is ever shifted.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Ring<T> {
    rows: usize,
    cap: usize,
    pos: usize,
    data: Vec<T>,
}

impl<T: Real> Ring<T> {
    pub(crate) fn new(rows: usize, cap: usize) -> Self {
        Ring {
            rows,
            cap,
            pos: 0,
            data: vec![T::zero(); rows * 2 * cap],
        }
    }

    /// Append `frames` columns of a dense `rows x frames` block.
    pub(crate) fn push(&mut self, block: &[T], frames: usize) {
        let ld = 2 * self.cap;
        for r in 0..self.rows {
            let src = &block[r * frames..(r + 1) * frames];
            let row = &mut self.data[r * ld..(r + 1) * ld];
            let mut p = self.pos;
            for &v in src {
                row[p] = v;
                row[p + self.cap] = v;
                p += 1;
                if p == self.cap {
                    p = 0;
                }
            }
        }
        self.pos = (self.pos + frames) % self.cap;
    }

    /// The newest `cap` columns, oldest first, as `(data, leading dimension)`.
    pub(crate) fn window(&self) -> (&[T], usize) {
        (&self.data[self.pos..], 2 * self.cap)
    }

    pub(crate) fn cap(&self) -> usize {
        self.cap
    }

    pub(crate) fn reset(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
        self.pos = 0;
    }

    pub(crate) fn len(&self) -> usize {
        self.data.len()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PackedConv<T> {
    geom: ConvGeom,
    packed: Vec<T>,
    bias_re: Vec<T>,
    bias_im: Vec<T>,
    out_ch: usize,
    /// Input frames of history the conv needs.
    history: usize,
}

impl<T: Real> PackedConv<T> {
    fn new(w: &ModelWeights<T>, spec: &ConvSpec) -> Self {
        PackedConv {
            geom: ConvGeom {
                rows_out: 2 * spec.out_ch,
                rows_in: 2 * spec.in_ch,
                kernel: spec.kernel,
                dilation: spec.dilation,
                stride: spec.stride,
                pad: 0,
            },
            packed: ops::pack_complex(w.re(spec.weight), w.im(spec.weight), spec.out_ch, spec.in_ch, spec.kernel),
            bias_re: w.re(spec.bias).to_vec(),
            bias_im: w.im(spec.bias).to_vec(),
            out_ch: spec.out_ch,
            history: spec.pad,
        }
    }

    /// Conv over `frames_in` columns of `x` (leading dimension `ld`), producing `frames` outputs.
    fn run(&self, x: &[T], ld: usize, frames: usize) -> Vec<T> {
        let mut y = vec![T::zero(); 2 * self.out_ch * frames];
        ops::add_bias(&mut y, self.out_ch, frames, &self.bias_re, &self.bias_im);
        ops::conv_forward(&self.packed, self.geom, x, ld, &mut y, frames, frames);
        y
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PackedLayer<T> {
    conv: PackedConv<T>,
    trelu: Vec<T>,
    gamma: (Vec<T>, Vec<T>),
    beta: (Vec<T>, Vec<T>),
}

impl<T: Real> PackedLayer<T> {
    fn new(w: &ModelWeights<T>, spec: &LayerSpec) -> Self {
        PackedLayer {
            conv: PackedConv::new(w, &spec.conv),
            trelu: w.tensor(spec.trelu).to_vec(),
            gamma: (w.re(spec.gamma).to_vec(), w.im(spec.gamma).to_vec()),
            beta: (w.re(spec.beta).to_vec(), w.im(spec.beta).to_vec()),
        }
    }

    /// `norm(trelu(y))` in place on a dense `2H x frames` block.
    fn activate(&self, y: &mut [T], frames: usize, eps: f64, state: &mut NormState) {
        let h = self.conv.out_ch;
        let mut a = vec![T::zero(); y.len()];
        ops::trelu_forward(y, &self.trelu, h, frames, &mut a);
        ops::norm_forward(
            &a,
            h,
            frames,
            (&self.gamma.0, &self.gamma.1),
            (&self.beta.0, &self.beta.1),
            eps,
            NormMode::Cumulative,
            state,
            y,
        );
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PackedStack<T> {
    down: Option<PackedConv<T>>,
    input: PackedLayer<T>,
    layers: Vec<PackedLayer<T>>,
    skip: PackedConv<T>,
    out: Option<PackedConv<T>>,
    rate: usize,
}

/// Weights rearranged for block processing; immutable and shareable
/// between streams.
#[derive(Clone, Debug)]
pub struct StreamNetwork<T> {
    config: ModelConfig,
    encoder: Vec<T>,
    stacks: Vec<PackedStack<T>>,
    head: PackedConv<T>,
    decoder: Vec<T>,
}

impl<T: Real> StreamNetwork<T> {
    pub fn new(w: &ModelWeights<T>) -> Self {
        let cfg = w.config().clone();
        let layout = w.layout();
        let stacks = layout
            .stacks
            .iter()
            .map(|s| PackedStack {
                down: s.down.as_ref().map(|d| PackedConv::new(w, d)),
                input: PackedLayer::new(w, &s.input),
                layers: s.layers.iter().map(|l| PackedLayer::new(w, l)).collect(),
                skip: PackedConv::new(w, &s.skip),
                out: s.out.as_ref().map(|o| PackedConv::new(w, o)),
                rate: s.rate_divisor,
            })
            .collect();
        let head = layout.head.as_ref().expect("validated config has a mask head");
        StreamNetwork {
            encoder: ops::pack_real(
                w.tensor(layout.encoder),
                2 * cfg.encoder_channels,
                cfg.input_channels(),
                cfg.encoder_kernel,
            ),
            head: PackedConv::new(w, head),
            decoder: ops::decoder_basis(w.re(layout.decoder), w.im(layout.decoder), cfg.encoder_channels, cfg.encoder_kernel),
            stacks,
            config: cfg,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }
}

/// Per-stream mutable state of the network part.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct NetState<T> {
    encoder: Ring<T>,
    down: Vec<Option<Ring<T>>>,
    layers: Vec<Vec<Ring<T>>>,
    norms: Vec<Vec<NormState>>,
    /// Decoder overlap-add ring indexed by output sample modulo its length.
    ola: Vec<T>,
    /// Samples consumed so far.
    clock: u64,
}

const OLA_LEN: usize = 2 * BLOCK_SIZE;

impl<T: Real> NetState<T> {
    pub(crate) fn new(net: &StreamNetwork<T>) -> Self {
        let cfg = &net.config;
        let frames = cfg.frames_per_block();
        let mut down = Vec::new();
        let mut layers = Vec::new();
        let mut norms = Vec::new();
        for s in &net.stacks {
            let f = frames / s.rate;
            down.push(s.down.as_ref().map(|d| Ring::new(d.geom.rows_in, d.history + 2 * f)));
            layers.push(
                s.layers
                    .iter()
                    .map(|l| Ring::new(l.conv.geom.rows_in, l.conv.history + f))
                    .collect(),
            );
            norms.push((0..=s.layers.len()).map(|_| NormState::new(cfg.hidden)).collect());
        }
        NetState {
            encoder: Ring::new(cfg.input_channels(), cfg.encoder_pad() + BLOCK_SIZE),
            down,
            layers,
            norms,
            ola: vec![T::zero(); OLA_LEN],
            clock: 0,
        }
    }

    pub(crate) fn reset(&mut self) {
        self.encoder.reset();
        self.down.iter_mut().flatten().for_each(Ring::reset);
        self.layers.iter_mut().flatten().for_each(Ring::reset);
        self.norms.iter_mut().flatten().for_each(NormState::reset);
        self.ola.iter_mut().for_each(|v| *v = T::zero());
        self.clock = 0;
    }

    pub(crate) fn clock(&self) -> u64 {
        self.clock
    }

    /// Complex history frames held by the conv caches (excludes the encoder's sample cache).
    pub(crate) fn cached_frames(&self, net: &StreamNetwork<T>) -> usize {
        let frames = net.config.frames_per_block();
        let mut total = 0;
        for (s, stack) in net.stacks.iter().enumerate() {
            let f = frames / stack.rate;
            if let Some(r) = &self.down[s] {
                total += r.cap() - 2 * f;
            }
            total += self.layers[s].iter().map(|r| r.cap() - f).sum::<usize>();
        }
        total
    }

    /// Scalars held in caches and statistics (constant for a given config).
    pub(crate) fn scalars(&self) -> usize {
        self.encoder.len()
            + self.down.iter().flatten().map(Ring::len).sum::<usize>()
            + self.layers.iter().flatten().map(Ring::len).sum::<usize>()
            + self.norms.iter().flatten().map(|n| n.sums.len() + 1).sum::<usize>()
            + self.ola.len()
    }

    /// One block of network input (`rows x 128`, row-major) to 128 output
    /// samples; output sample `n` is the decoder output for input time `n - lookahead`.
    pub(crate) fn process(&mut self, net: &StreamNetwork<T>, input: &[T], out: &mut [T]) {
        let cfg = &net.config;
        let c = cfg.encoder_channels;
        let frames = cfg.frames_per_block();
        let eps = cfg.norm_epsilon;

        self.encoder.push(input, BLOCK_SIZE);
        let (x, ld) = self.encoder.window();
        let g = ConvGeom {
            rows_out: 2 * c,
            rows_in: cfg.input_channels(),
            kernel: cfg.encoder_kernel,
            dilation: 1,
            stride: cfg.encoder_stride,
            pad: 0,
        };
        let mut latent = vec![T::zero(); 2 * c * frames];
        ops::conv_forward(&net.encoder, g, x, ld, &mut latent, frames, frames);

        let mut skip_sum = vec![T::zero(); 2 * c * frames];
        let mut carry: Option<Vec<T>> = None;
        for (s, stack) in net.stacks.iter().enumerate() {
            let f = frames / stack.rate;
            let x = match (&stack.down, carry.take()) {
                (Some(down), Some(prev)) => {
                    let ring = self.down[s].as_mut().expect("ring for downsampler");
                    ring.push(&prev, 2 * f);
                    let (x, ld) = ring.window();
                    down.run(x, ld, f)
                }
                _ => latent.clone(),
            };
            let mut h = stack.input.conv.run(&x, f, f);
            stack.input.activate(&mut h, f, eps, &mut self.norms[s][0]);
            for (m, layer) in stack.layers.iter().enumerate() {
                let ring = &mut self.layers[s][m];
                ring.push(&h, f);
                let (x, ld) = ring.window();
                let mut y = layer.conv.run(x, ld, f);
                layer.activate(&mut y, f, eps, &mut self.norms[s][m + 1]);
                h.iter_mut().zip(&y).for_each(|(a, b)| *a += *b);
            }
            let skip = stack.skip.run(&h, f, f);
            for r in 0..2 * c {
                for t in 0..frames {
                    skip_sum[r * frames + t] += skip[r * f + t / stack.rate];
                }
            }
            carry = stack.out.as_ref().map(|o| o.run(&h, f, f));
        }

        let logits = net.head.run(&skip_sum, frames, frames);
        let mut mask = vec![T::zero(); logits.len()];
        ops::ctanh_forward(&logits, c * frames, &mut mask);
        let mut masked = vec![T::zero(); mask.len()];
        ops::cmul(&latent, &mask, &mut masked, c * frames);
        let contrib = ops::decoder_frames(&net.decoder, c, cfg.encoder_kernel, &masked, frames);

        // frame j of this block writes samples clock + stride*j - offset + tau
        let base = self.clock as i64 - cfg.decoder_offset() as i64;
        let k = cfg.encoder_kernel;
        for tau in 0..k {
            for j in 0..frames {
                let n = base + (cfg.encoder_stride * j + tau) as i64;
                if n >= 0 {
                    self.ola[n as usize % OLA_LEN] += contrib[tau * frames + j];
                }
            }
        }
        let lag = cfg.lookahead_samples() as i64;
        for (i, o) in out.iter_mut().enumerate() {
            let n = self.clock as i64 + i as i64 - lag;
            if n >= 0 {
                let slot = n as usize % OLA_LEN;
                *o = self.ola[slot];
                self.ola[slot] = T::zero();
            } else {
                *o = T::zero();
            }
        }
        self.clock += BLOCK_SIZE as u64;
    }
}
