//! Whole-sequence forward pass with a reverse-mode tape.
//!
//! Every node owns a dense activation block: `2C x frames` stacked rows for
//! complex tensors, `rows x frames` for the real encoder input and `1 x T`
//! for the decoded waveform. Inference graphs drop intermediates as soon as
//! the builder is done with them; training graphs keep everything.

use super::ops::{self, ConvGeom, NormMode, NormState};
use super::weights::{ConvSpec, ModelWeights};
use crate::{Error, Real, Result};

pub type NodeId = usize;

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Encoder { x: NodeId },
    Conv { x: NodeId, spec: ConvSpec, packed: Vec<T> },
    TRelu { x: NodeId, params: usize },
    Norm { x: NodeId, gamma: usize, beta: usize },
    Add { a: NodeId, b: NodeId },
    Upsample { x: NodeId, factor: usize },
    Ctanh { x: NodeId },
    Mul { a: NodeId, b: NodeId },
    Decoder { x: NodeId, basis: Vec<T> },
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    rows: usize,
    frames: usize,
}

/// Node ids of the interesting intermediate results of [`forward`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outputs {
    pub latent: NodeId,
    pub mask: NodeId,
    pub masked: NodeId,
    pub output: NodeId,
}

#[derive(Clone, Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    values: Vec<Option<Vec<T>>>,
    training: bool,
    eps: f64,
}

impl<T: Real> Graph<T> {
    pub fn new(training: bool, norm_epsilon: f64) -> Self {
        Graph {
            nodes: Vec::new(),
            values: Vec::new(),
            training,
            eps: norm_epsilon,
        }
    }

    fn push(&mut self, op: Op<T>, rows: usize, frames: usize, value: Vec<T>) -> NodeId {
        debug_assert_eq!(value.len(), rows * frames);
        self.nodes.push(Node { op, rows, frames });
        self.values.push(Some(value));
        self.nodes.len() - 1
    }

    /// Rows and frames of a node.
    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].frames)
    }

    /// Activation of a node; panics if it was released.
    pub fn value(&self, id: NodeId) -> &[T] {
        self.values[id].as_deref().expect("node value was released")
    }

    pub fn take(&mut self, id: NodeId) -> Vec<T> {
        self.values[id].take().expect("node value was released")
    }

    /// Drop an intermediate (inference graphs only).
    pub fn release(&mut self, id: NodeId) {
        if !self.training {
            self.values[id] = None;
        }
    }

    pub fn input(&mut self, rows: usize, frames: usize, data: Vec<T>) -> Result<NodeId> {
        if data.len() != rows * frames {
            return Err(Error::Shape(format!("input of {} values is not {rows}x{frames}", data.len())));
        }
        Ok(self.push(Op::Input, rows, frames, data))
    }

    /// Causal real-to-complex encoder; `T` samples give `T / stride` frames.
    pub fn encoder(&mut self, w: &ModelWeights<T>, x: NodeId) -> Result<NodeId> {
        let cfg = w.config();
        let (rows, len) = self.shape(x);
        if rows != cfg.input_channels() {
            return Err(Error::Shape(format!("encoder expects {} channels, got {rows}", cfg.input_channels())));
        }
        let c2 = 2 * cfg.encoder_channels;
        let id = w.layout().encoder;
        let packed = ops::pack_real(w.tensor(id), c2, rows, cfg.encoder_kernel);
        let g = ConvGeom {
            rows_out: c2,
            rows_in: rows,
            kernel: cfg.encoder_kernel,
            dilation: 1,
            stride: cfg.encoder_stride,
            pad: cfg.encoder_pad(),
        };
        let frames = g.frames_out(len);
        let mut y = vec![T::zero(); c2 * frames];
        ops::conv_forward(&packed, g, self.value(x), len, &mut y, frames, frames);
        Ok(self.push(Op::Encoder { x }, c2, frames, y))
    }

    pub fn conv(&mut self, w: &ModelWeights<T>, spec: &ConvSpec, x: NodeId) -> Result<NodeId> {
        let (rows, len) = self.shape(x);
        if rows != 2 * spec.in_ch {
            return Err(Error::Shape(format!("conv expects {} channels, got {}", spec.in_ch, rows / 2)));
        }
        let packed = ops::pack_complex(w.re(spec.weight), w.im(spec.weight), spec.out_ch, spec.in_ch, spec.kernel);
        let g = geom(spec);
        let frames = g.frames_out(len);
        let mut y = vec![T::zero(); 2 * spec.out_ch * frames];
        ops::add_bias(&mut y, spec.out_ch, frames, w.re(spec.bias), w.im(spec.bias));
        ops::conv_forward(&packed, g, self.value(x), len, &mut y, frames, frames);
        Ok(self.push(
            Op::Conv {
                x,
                spec: spec.clone(),
                packed,
            },
            2 * spec.out_ch,
            frames,
            y,
        ))
    }

    pub fn trelu(&mut self, w: &ModelWeights<T>, params: usize, x: NodeId) -> NodeId {
        let (rows, frames) = self.shape(x);
        let mut y = vec![T::zero(); rows * frames];
        ops::trelu_forward(self.value(x), w.tensor(params), rows / 2, frames, &mut y);
        self.push(Op::TRelu { x, params }, rows, frames, y)
    }

    /// Causal cumulative normalization with complex scale and shift.
    pub fn norm(&mut self, w: &ModelWeights<T>, gamma: usize, beta: usize, x: NodeId) -> NodeId {
        let (rows, frames) = self.shape(x);
        let c = rows / 2;
        let mut y = vec![T::zero(); rows * frames];
        ops::norm_forward(
            self.value(x),
            c,
            frames,
            (w.re(gamma), w.im(gamma)),
            (w.re(beta), w.im(beta)),
            self.eps,
            NormMode::Cumulative,
            &mut NormState::new(c),
            &mut y,
        );
        self.push(Op::Norm { x, gamma, beta }, rows, frames, y)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("add {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let (rows, frames) = self.shape(a);
        let y = self.value(a).iter().zip(self.value(b)).map(|(p, q)| *p + *q).collect();
        Ok(self.push(Op::Add { a, b }, rows, frames, y))
    }

    /// Nearest-neighbour upsampling by `factor`, truncated to `frames`.
    pub fn upsample(&mut self, x: NodeId, factor: usize, frames: usize) -> NodeId {
        let (rows, fin) = self.shape(x);
        let xv = self.value(x);
        let mut y = vec![T::zero(); rows * frames];
        for r in 0..rows {
            for t in 0..frames {
                y[r * frames + t] = xv[r * fin + (t / factor).min(fin - 1)];
            }
        }
        self.push(Op::Upsample { x, factor }, rows, frames, y)
    }

    pub fn ctanh(&mut self, x: NodeId) -> NodeId {
        let (rows, frames) = self.shape(x);
        let mut y = vec![T::zero(); rows * frames];
        ops::ctanh_forward(self.value(x), rows / 2 * frames, &mut y);
        self.push(Op::Ctanh { x }, rows, frames, y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("mask {:?} vs latent {:?}", self.shape(b), self.shape(a))));
        }
        let (rows, frames) = self.shape(a);
        let mut y = vec![T::zero(); rows * frames];
        ops::cmul(self.value(a), self.value(b), &mut y, rows / 2 * frames);
        Ok(self.push(Op::Mul { a, b }, rows, frames, y))
    }

    /// Complex-to-real transposed convolution; `F` frames give `F * stride` samples.
    pub fn decoder(&mut self, w: &ModelWeights<T>, x: NodeId) -> NodeId {
        let cfg = w.config();
        let (c, k) = (cfg.encoder_channels, cfg.encoder_kernel);
        let id = w.layout().decoder;
        let basis = ops::decoder_basis(w.re(id), w.im(id), c, k);
        let frames = self.shape(x).1;
        let contrib = ops::decoder_frames(&basis, c, k, self.value(x), frames);
        let mut z = vec![T::zero(); frames * cfg.encoder_stride];
        ops::overlap_add(&contrib, k, frames, cfg.encoder_stride, cfg.decoder_offset(), &mut z);
        let len = z.len();
        self.push(Op::Decoder { x, basis }, 1, len, z)
    }

    /// Reverse pass seeded with `grad` at `output`; returns parameter
    /// gradients in the flat weight layout.
    pub fn backward(&self, w: &ModelWeights<T>, output: NodeId, grad: Vec<T>) -> Result<Vec<T>> {
        if !self.training {
            return Err(Error::Internal("backward on an inference graph".into()));
        }
        let (rows, frames) = self.shape(output);
        if grad.len() != rows * frames {
            return Err(Error::Shape(format!("seed gradient has {} values, node has {}", grad.len(), rows * frames)));
        }
        let cfg = w.config();
        let layout = w.layout();
        let off = |id: usize| layout.tensors()[id].offset;
        let cnt = |id: usize| layout.tensors()[id].count;
        let mut gp = vec![T::zero(); layout.len()];
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[output] = Some(grad);
        for id in (0..=output).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let frames = node.frames;
            match &node.op {
                Op::Input => {}
                Op::Encoder { x } => {
                    let (rows_in, len) = self.shape(*x);
                    let g = ConvGeom {
                        rows_out: node.rows,
                        rows_in,
                        kernel: cfg.encoder_kernel,
                        dilation: 1,
                        stride: cfg.encoder_stride,
                        pad: cfg.encoder_pad(),
                    };
                    let blocks = ops::conv_backward_blocks(g, &gy, frames, self.value(*x), len, frames);
                    let e = layout.encoder;
                    ops::fold_real_grad(&blocks, node.rows, rows_in, cfg.encoder_kernel, &mut gp[off(e)..off(e) + cnt(e)]);
                }
                Op::Conv { x, spec, packed } => {
                    let g = geom(spec);
                    let len = self.shape(*x).1;
                    let xv = self.value(*x);
                    let gx = grad_slot(&mut grads, *x, 2 * spec.in_ch * len);
                    ops::conv_backward_input(packed, g, &gy, frames, gx, len, frames);
                    let blocks = ops::conv_backward_blocks(g, &gy, frames, xv, len, frames);
                    let (wo, wn) = (off(spec.weight), cnt(spec.weight));
                    let (gwr, gwi) = gp[wo..wo + 2 * wn].split_at_mut(wn);
                    ops::fold_complex_grad(&blocks, spec.out_ch, spec.in_ch, spec.kernel, gwr, gwi);
                    let (bo, bn) = (off(spec.bias), cnt(spec.bias));
                    let (gbr, gbi) = gp[bo..bo + 2 * bn].split_at_mut(bn);
                    ops::bias_grad(&gy, spec.out_ch, frames, gbr, gbi);
                }
                Op::TRelu { x, params } => {
                    let gx = grad_slot(&mut grads, *x, node.rows * frames);
                    let po = off(*params);
                    let pn = layout.tensors()[*params].storage();
                    ops::trelu_backward(self.value(*x), w.tensor(*params), node.rows / 2, frames, &gy, gx, &mut gp[po..po + pn]);
                }
                Op::Norm { x, gamma, beta } => {
                    let c = node.rows / 2;
                    let gx = grad_slot(&mut grads, *x, node.rows * frames);
                    let (go, bo) = (off(*gamma), off(*beta));
                    let mut gg = vec![T::zero(); 2 * c];
                    let mut gb = vec![T::zero(); 2 * c];
                    {
                        let (ggr, ggi) = gg.split_at_mut(c);
                        let (gbr, gbi) = gb.split_at_mut(c);
                        ops::norm_backward(
                            self.value(*x),
                            c,
                            frames,
                            (w.re(*gamma), w.im(*gamma)),
                            self.eps,
                            NormMode::Cumulative,
                            &gy,
                            gx,
                            (ggr, ggi),
                            (gbr, gbi),
                        );
                    }
                    for i in 0..2 * c {
                        gp[go + i] += gg[i];
                        gp[bo + i] += gb[i];
                    }
                }
                Op::Add { a, b } => {
                    for src in [*a, *b] {
                        let gx = grad_slot(&mut grads, src, gy.len());
                        gx.iter_mut().zip(&gy).for_each(|(p, q)| *p += *q);
                    }
                }
                Op::Upsample { x, factor } => {
                    let (rows, fin) = self.shape(*x);
                    let gx = grad_slot(&mut grads, *x, rows * fin);
                    for r in 0..rows {
                        for t in 0..frames {
                            gx[r * fin + (t / factor).min(fin - 1)] += gy[r * frames + t];
                        }
                    }
                }
                Op::Ctanh { x } => {
                    let gx = grad_slot(&mut grads, *x, gy.len());
                    ops::ctanh_backward(self.value(*x), node.rows / 2 * frames, &gy, gx);
                }
                Op::Mul { a, b } => {
                    let n = node.rows / 2 * frames;
                    let mut ga = vec![T::zero(); 2 * n];
                    let mut gb = vec![T::zero(); 2 * n];
                    ops::cmul_backward(self.value(*a), self.value(*b), &gy, n, &mut ga, &mut gb);
                    for (src, g) in [(*a, ga), (*b, gb)] {
                        let gx = grad_slot(&mut grads, src, 2 * n);
                        gx.iter_mut().zip(&g).for_each(|(p, q)| *p += *q);
                    }
                }
                Op::Decoder { x, basis } => {
                    let (rows, fr) = self.shape(*x);
                    let c = rows / 2;
                    let k = cfg.encoder_kernel;
                    let gf = ops::overlap_gather(&gy, k, fr, cfg.encoder_stride, cfg.decoder_offset());
                    // gX = D gF, gD = X gF^T
                    let gx = grad_slot(&mut grads, *x, rows * fr);
                    crate::real::gemm(
                        T::one(),
                        crate::real::MatRef::dense(basis, rows, k),
                        crate::real::MatRef::dense(&gf, k, fr),
                        T::one(),
                        crate::real::MatMut::dense(gx, rows, fr),
                    );
                    let mut gd = vec![T::zero(); rows * k];
                    crate::real::gemm(
                        T::one(),
                        crate::real::MatRef::dense(self.value(*x), rows, fr),
                        crate::real::MatRef::dense(&gf, k, fr).t(),
                        T::zero(),
                        crate::real::MatMut::dense(&mut gd, rows, k),
                    );
                    let d = layout.decoder;
                    let o = off(d);
                    for i in 0..c * k {
                        gp[o + i] += gd[i];
                        gp[o + c * k + i] -= gd[c * k + i];
                    }
                }
            }
        }
        Ok(gp)
    }
}

fn geom(spec: &ConvSpec) -> ConvGeom {
    ConvGeom {
        rows_out: 2 * spec.out_ch,
        rows_in: 2 * spec.in_ch,
        kernel: spec.kernel,
        dilation: spec.dilation,
        stride: spec.stride,
        pad: spec.pad,
    }
}

fn grad_slot<T: Real>(grads: &mut [Option<Vec<T>>], id: NodeId, len: usize) -> &mut Vec<T> {
    grads[id].get_or_insert_with(|| vec![T::zero(); len])
}

/// Build the separator on top of `latent` and return the mask node.
pub fn separator<T: Real>(g: &mut Graph<T>, w: &ModelWeights<T>, latent: NodeId) -> Result<NodeId> {
    let layout = w.layout().clone();
    let frames = g.shape(latent).1;
    let mut x = latent;
    let mut skip_sum: Option<NodeId> = None;
    for (s, stack) in layout.stacks.iter().enumerate() {
        if let Some(down) = &stack.down {
            let d = g.conv(w, down, x)?;
            g.release(x);
            x = d;
        }
        let layer = |g: &mut Graph<T>, l: &super::weights::LayerSpec, x: NodeId| -> Result<NodeId> {
            let c = g.conv(w, &l.conv, x)?;
            let a = g.trelu(w, l.trelu, c);
            g.release(c);
            let n = g.norm(w, l.gamma, l.beta, a);
            g.release(a);
            Ok(n)
        };
        let mut h = layer(g, &stack.input, x)?;
        if x != latent {
            g.release(x);
        }
        for l in &stack.layers {
            let y = layer(g, l, h)?;
            let r = g.add(h, y)?;
            g.release(h);
            g.release(y);
            h = r;
        }
        let skip = g.conv(w, &stack.skip, h)?;
        let up = if s == 0 {
            skip
        } else {
            let u = g.upsample(skip, stack.rate_divisor, frames);
            g.release(skip);
            u
        };
        skip_sum = Some(match skip_sum {
            None => up,
            Some(acc) => {
                let t = g.add(acc, up)?;
                g.release(acc);
                g.release(up);
                t
            }
        });
        match &stack.out {
            Some(out) => {
                x = g.conv(w, out, h)?;
                g.release(h);
            }
            None => g.release(h),
        }
    }
    let (Some(head_in), Some(head)) = (skip_sum, &layout.head) else {
        return Err(Error::Config("separator needs at least one stack".into()));
    };
    let logits = g.conv(w, head, head_in)?;
    g.release(head_in);
    let mask = g.ctanh(logits);
    g.release(logits);
    Ok(mask)
}

/// Run the whole network on `input` (`rows x len`, row-major; `len` a
/// multiple of the encoder stride). Output node holds `len` samples with
/// `out[n]` the estimate for input time `n`.
pub fn forward<T: Real>(w: &ModelWeights<T>, input: Vec<T>, len: usize, training: bool) -> Result<(Graph<T>, Outputs)> {
    let cfg = w.config();
    let rows = cfg.input_channels();
    if len % cfg.encoder_stride != 0 {
        return Err(Error::Shape(format!("input length {len} is not a multiple of {}", cfg.encoder_stride)));
    }
    let mut g = Graph::new(training, cfg.norm_epsilon);
    let x = g.input(rows, len, input)?;
    let latent = g.encoder(w, x)?;
    g.release(x);
    let mask = separator(&mut g, w, latent)?;
    let masked = g.mul(latent, mask)?;
    let output = g.decoder(w, masked);
    Ok((
        g,
        Outputs {
            latent,
            mask,
            masked,
            output,
        },
    ))
}
