//! Forward and adjoint kernels shared by the offline graph and the
//! streaming engine.
//!
//! Complex activations are dense `2C x T` blocks (real rows, then imaginary
//! rows). A complex weight `W = Wr + j Wi` acts as the real block matrix
//! `[[Wr, -Wi], [Wi, Wr]]` on the stacked rows, so every convolution is a
//! handful of real GEMMs over strided column views. Gradients with respect
//! to complex quantities are stored as `dL/dRe + j dL/dIm`.

use crate::real::{gemm, MatMut, MatRef};
use crate::Real;

/// Pack complex weights `(out, in, kernel)` into `kernel` real blocks of
/// `2*out x 2*in`, row-major.
pub fn pack_complex<T: Real>(wr: &[T], wi: &[T], out_ch: usize, in_ch: usize, kernel: usize) -> Vec<T> {
    let (ro, ri) = (2 * out_ch, 2 * in_ch);
    let mut p = vec![T::zero(); kernel * ro * ri];
    for kk in 0..kernel {
        let blk = &mut p[kk * ro * ri..(kk + 1) * ro * ri];
        for o in 0..out_ch {
            for i in 0..in_ch {
                let idx = (o * in_ch + i) * kernel + kk;
                let (a, b) = (wr[idx], wi[idx]);
                blk[o * ri + i] = a;
                blk[o * ri + in_ch + i] = -b;
                blk[(out_ch + o) * ri + i] = b;
                blk[(out_ch + o) * ri + in_ch + i] = a;
            }
        }
    }
    p
}

/// Pack real weights `(out, in, kernel)` into `kernel` blocks of `out x in`.
pub fn pack_real<T: Real>(w: &[T], out_ch: usize, in_ch: usize, kernel: usize) -> Vec<T> {
    let mut p = vec![T::zero(); kernel * out_ch * in_ch];
    for kk in 0..kernel {
        for o in 0..out_ch {
            for i in 0..in_ch {
                p[kk * out_ch * in_ch + o * in_ch + i] = w[(o * in_ch + i) * kernel + kk];
            }
        }
    }
    p
}

/// Geometry of a strided, dilated 1-D convolution over real rows.
///
/// Output frame `u` reads input columns `stride*u - pad + kk*dilation`;
/// columns left of 0 are implicit zeros.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeom {
    pub rows_out: usize,
    pub rows_in: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Output length for `frames_in` input columns.
    pub fn frames_out(&self, frames_in: usize) -> usize {
        let span = (self.kernel - 1) * self.dilation + 1;
        if frames_in + self.pad < span {
            0
        } else {
            (frames_in + self.pad - span) / self.stride + 1
        }
    }

    /// First valid output frame and its input column for tap `kk`.
    fn tap(&self, kk: usize, frames_out: usize) -> (usize, usize) {
        let off = (kk * self.dilation) as isize - self.pad as isize;
        let u0 = if off < 0 {
            ((-off) as usize).div_ceil(self.stride).min(frames_out)
        } else {
            0
        };
        (u0, ((self.stride * u0) as isize + off).max(0) as usize)
    }

    fn block(&self) -> usize {
        self.rows_out * self.rows_in
    }
}

/// `y += conv(x)` for `frames_out` output columns. Matrices are row-major
/// with leading dimensions `ldx` and `ldy`.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Real>(packed: &[T], g: ConvGeom, x: &[T], ldx: usize, y: &mut [T], ldy: usize, frames_out: usize) {
    let blk = g.block();
    for kk in 0..g.kernel {
        let (u0, xs) = g.tap(kk, frames_out);
        if u0 == frames_out {
            continue;
        }
        let a = MatRef::dense(&packed[kk * blk..(kk + 1) * blk], g.rows_out, g.rows_in);
        let b = MatRef {
            data: x,
            offset: xs,
            rows: g.rows_in,
            cols: frames_out - u0,
            rs: ldx,
            cs: g.stride,
        };
        let c = MatMut {
            data: &mut *y,
            offset: u0,
            rows: g.rows_out,
            cols: frames_out - u0,
            rs: ldy,
            cs: 1,
        };
        gemm(T::one(), a, b, T::one(), c);
    }
}

/// Adjoint of [`conv_forward`] with respect to `x`: `gx += W^T gy`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward_input<T: Real>(packed: &[T], g: ConvGeom, gy: &[T], ldgy: usize, gx: &mut [T], ldgx: usize, frames_out: usize) {
    let blk = g.block();
    for kk in 0..g.kernel {
        let (u0, xs) = g.tap(kk, frames_out);
        if u0 == frames_out {
            continue;
        }
        let a = MatRef::dense(&packed[kk * blk..(kk + 1) * blk], g.rows_out, g.rows_in).t();
        let b = MatRef {
            data: gy,
            offset: u0,
            rows: g.rows_out,
            cols: frames_out - u0,
            rs: ldgy,
            cs: 1,
        };
        let c = MatMut {
            data: &mut *gx,
            offset: xs,
            rows: g.rows_in,
            cols: frames_out - u0,
            rs: ldgx,
            cs: g.stride,
        };
        gemm(T::one(), a, b, T::one(), c);
    }
}

/// Per-tap weight gradient blocks `gy x_kk^T`, each `rows_out x rows_in`.
pub fn conv_backward_blocks<T: Real>(g: ConvGeom, gy: &[T], ldgy: usize, x: &[T], ldx: usize, frames_out: usize) -> Vec<T> {
    let blk = g.block();
    let mut out = vec![T::zero(); g.kernel * blk];
    for kk in 0..g.kernel {
        let (u0, xs) = g.tap(kk, frames_out);
        if u0 == frames_out {
            continue;
        }
        let a = MatRef {
            data: gy,
            offset: u0,
            rows: g.rows_out,
            cols: frames_out - u0,
            rs: ldgy,
            cs: 1,
        };
        let b = MatRef {
            data: x,
            offset: xs,
            rows: g.rows_in,
            cols: frames_out - u0,
            rs: ldx,
            cs: g.stride,
        }
        .t();
        let c = MatMut::dense(&mut out[kk * blk..(kk + 1) * blk], g.rows_out, g.rows_in);
        gemm(T::one(), a, b, T::zero(), c);
    }
    out
}

/// Fold real block gradients back onto `(out, in, kernel)` complex weights.
pub fn fold_complex_grad<T: Real>(blocks: &[T], out_ch: usize, in_ch: usize, kernel: usize, gwr: &mut [T], gwi: &mut [T]) {
    let (ro, ri) = (2 * out_ch, 2 * in_ch);
    for kk in 0..kernel {
        let b = &blocks[kk * ro * ri..(kk + 1) * ro * ri];
        for o in 0..out_ch {
            for i in 0..in_ch {
                let idx = (o * in_ch + i) * kernel + kk;
                gwr[idx] += b[o * ri + i] + b[(out_ch + o) * ri + in_ch + i];
                gwi[idx] += -b[o * ri + in_ch + i] + b[(out_ch + o) * ri + i];
            }
        }
    }
}

pub fn fold_real_grad<T: Real>(blocks: &[T], out_ch: usize, in_ch: usize, kernel: usize, gw: &mut [T]) {
    for kk in 0..kernel {
        for o in 0..out_ch {
            for i in 0..in_ch {
                gw[(o * in_ch + i) * kernel + kk] += blocks[kk * out_ch * in_ch + o * in_ch + i];
            }
        }
    }
}

/// Add a complex per-channel bias to a dense `2C x T` block.
pub fn add_bias<T: Real>(y: &mut [T], channels: usize, frames: usize, br: &[T], bi: &[T]) {
    for c in 0..channels {
        y[c * frames..(c + 1) * frames].iter_mut().for_each(|v| *v += br[c]);
        y[(channels + c) * frames..(channels + c + 1) * frames]
            .iter_mut()
            .for_each(|v| *v += bi[c]);
    }
}

pub fn bias_grad<T: Real>(gy: &[T], channels: usize, frames: usize, gbr: &mut [T], gbi: &mut [T]) {
    for c in 0..channels {
        gbr[c] += gy[c * frames..(c + 1) * frames].iter().copied().sum::<T>();
        gbi[c] += gy[(channels + c) * frames..(channels + c + 1) * frames].iter().copied().sum::<T>();
    }
}

/// TReLU parameters for one channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TRelu<T> {
    pub h_rr: T,
    pub h_ri: T,
    pub h_ir: T,
    pub h_ii: T,
    pub b1: T,
    pub b2: T,
}

impl<T: Real> TRelu<T> {
    /// Read channel `c` from a `rows x C` parameter tensor (rows 5 when shared).
    pub fn from_tensor(p: &[T], channels: usize, c: usize) -> Self {
        let row = |r: usize| p[r * channels + c];
        let shared = p.len() == 5 * channels;
        TRelu {
            h_rr: row(0),
            h_ri: row(1),
            h_ii: row(2),
            b1: row(3),
            b2: row(4),
            h_ir: if shared { row(1) } else { row(5) },
        }
    }

    #[inline]
    pub fn apply(&self, re: T, im: T) -> (T, T) {
        let a = self.h_rr * re + self.h_ri * im + self.b1;
        let b = self.h_ir * re + self.h_ii * im + self.b2;
        (a.max(T::zero()), b.max(T::zero()))
    }
}

/// `out = ReLU(h_rr Re + h_ri Im + b1) + j ReLU(h_ir Re + h_ii Im + b2)` per channel.
pub fn trelu_forward<T: Real>(x: &[T], params: &[T], channels: usize, frames: usize, y: &mut [T]) {
    for c in 0..channels {
        let p = TRelu::from_tensor(params, channels, c);
        let (re, im) = (c * frames, (channels + c) * frames);
        for t in 0..frames {
            let (a, b) = p.apply(x[re + t], x[im + t]);
            y[re + t] = a;
            y[im + t] = b;
        }
    }
}

/// Adjoint of [`trelu_forward`]; ReLU subgradient 0 at the kink.
pub fn trelu_backward<T: Real>(x: &[T], params: &[T], channels: usize, frames: usize, gy: &[T], gx: &mut [T], gp: &mut [T]) {
    let shared = params.len() == 5 * channels;
    for c in 0..channels {
        let p = TRelu::from_tensor(params, channels, c);
        let (re, im) = (c * frames, (channels + c) * frames);
        let mut g = [T::zero(); 6];
        for t in 0..frames {
            let (xr, xi) = (x[re + t], x[im + t]);
            let a = p.h_rr * xr + p.h_ri * xi + p.b1;
            let b = p.h_ir * xr + p.h_ii * xi + p.b2;
            let ga = if a > T::zero() { gy[re + t] } else { T::zero() };
            let gb = if b > T::zero() { gy[im + t] } else { T::zero() };
            gx[re + t] += ga * p.h_rr + gb * p.h_ir;
            gx[im + t] += ga * p.h_ri + gb * p.h_ii;
            g[0] += ga * xr;
            g[1] += ga * xi;
            g[2] += gb * xi;
            g[3] += ga;
            g[4] += gb;
            g[5] += gb * xr;
        }
        gp[c] += g[0];
        gp[channels + c] += g[1];
        gp[2 * channels + c] += g[2];
        gp[3 * channels + c] += g[3];
        gp[4 * channels + c] += g[4];
        if shared {
            gp[channels + c] += g[5];
        } else {
            gp[5 * channels + c] += g[5];
        }
    }
}

/// Running per-channel power for the causal normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct NormState {
    pub sums: Vec<f64>,
    pub count: u64,
}

impl NormState {
    pub fn new(channels: usize) -> Self {
        NormState {
            sums: vec![0.0; channels],
            count: 0,
        }
    }

    pub fn reset(&mut self) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.count = 0;
    }
}

/// Which power statistic the normalization divides by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Mean power of frames `0..=t`, carried across calls in [`NormState`].
    Cumulative,
    /// Mean power over the whole block.
    PerClip,
}

fn norm_scales<T: Real>(x: &[T], channels: usize, frames: usize, eps: f64, mode: NormMode, state: &mut NormState) -> Vec<T> {
    let mut r = vec![T::zero(); channels * frames];
    let count0 = state.count;
    for c in 0..channels {
        let (re, im) = (&x[c * frames..(c + 1) * frames], &x[(channels + c) * frames..(channels + c + 1) * frames]);
        match mode {
            NormMode::Cumulative => {
                let mut s = state.sums[c];
                for t in 0..frames {
                    let (a, b) = (re[t].as_f64(), im[t].as_f64());
                    s += a * a + b * b;
                    let p = s / (count0 + t as u64 + 1) as f64;
                    r[c * frames + t] = T::cst(1.0 / (p + eps).sqrt());
                }
                state.sums[c] = s;
            }
            NormMode::PerClip => {
                let s: f64 = re.iter().zip(im).map(|(a, b)| a.as_f64().powi(2) + b.as_f64().powi(2)).sum();
                let v = T::cst(1.0 / (s / frames as f64 + eps).sqrt());
                r[c * frames..(c + 1) * frames].iter_mut().for_each(|x| *x = v);
            }
        }
    }
    if mode == NormMode::Cumulative {
        state.count += frames as u64;
    }
    r
}

/// `y = gamma * x / sqrt(power + eps) + beta` per channel.
#[allow(clippy::too_many_arguments)]
pub fn norm_forward<T: Real>(
    x: &[T],
    channels: usize,
    frames: usize,
    gamma: (&[T], &[T]),
    beta: (&[T], &[T]),
    eps: f64,
    mode: NormMode,
    state: &mut NormState,
    y: &mut [T],
) {
    let r = norm_scales(x, channels, frames, eps, mode, state);
    for c in 0..channels {
        let (gr, gi, br, bi) = (gamma.0[c], gamma.1[c], beta.0[c], beta.1[c]);
        let (re, im) = (c * frames, (channels + c) * frames);
        for t in 0..frames {
            let s = r[c * frames + t];
            let (ur, ui) = (x[re + t] * s, x[im + t] * s);
            y[re + t] = gr * ur - gi * ui + br;
            y[im + t] = gr * ui + gi * ur + bi;
        }
    }
}

/// Adjoint of [`norm_forward`] over a whole sequence starting from an empty state.
#[allow(clippy::too_many_arguments)]
pub fn norm_backward<T: Real>(
    x: &[T],
    channels: usize,
    frames: usize,
    gamma: (&[T], &[T]),
    eps: f64,
    mode: NormMode,
    gy: &[T],
    gx: &mut [T],
    ggamma: (&mut [T], &mut [T]),
    gbeta: (&mut [T], &mut [T]),
) {
    let r = norm_scales(x, channels, frames, eps, mode, &mut NormState::new(channels));
    let mut q = vec![0.0f64; frames];
    for c in 0..channels {
        let (gr, gi) = (gamma.0[c].as_f64(), gamma.1[c].as_f64());
        let (re, im) = (c * frames, (channels + c) * frames);
        let (mut sgr, mut sgi, mut sbr, mut sbi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for t in 0..frames {
            let s = r[c * frames + t].as_f64();
            let (xr, xi) = (x[re + t].as_f64(), x[im + t].as_f64());
            let (yr, yi) = (gy[re + t].as_f64(), gy[im + t].as_f64());
            let (ur, ui) = (xr * s, xi * s);
            // g_gamma += g_y conj(u), g_beta += g_y, g_u = conj(gamma) g_y
            sgr += yr * ur + yi * ui;
            sgi += yi * ur - yr * ui;
            sbr += yr;
            sbi += yi;
            let (gur, gui) = (gr * yr + gi * yi, gr * yi - gi * yr);
            // direct path through u = x r
            gx[re + t] += T::cst(gur * s);
            gx[im + t] += T::cst(gui * s);
            // dL/dp_t = -r^3/2 Re(conj(g_u) x)
            q[t] = -0.5 * s * s * s * (gur * xr + gui * xi);
        }
        ggamma.0[c] += T::cst(sgr);
        ggamma.1[c] += T::cst(sgi);
        gbeta.0[c] += T::cst(sbr);
        gbeta.1[c] += T::cst(sbi);
        match mode {
            NormMode::Cumulative => {
                // dL/d|x_tau|^2 = sum_{t >= tau} q_t / (t + 1)
                let mut acc = 0.0;
                for t in (0..frames).rev() {
                    acc += q[t] / (t + 1) as f64;
                    let (xr, xi) = (x[re + t].as_f64(), x[im + t].as_f64());
                    gx[re + t] += T::cst(2.0 * xr * acc);
                    gx[im + t] += T::cst(2.0 * xi * acc);
                }
            }
            NormMode::PerClip => {
                let acc = q.iter().sum::<f64>() / frames as f64;
                for t in 0..frames {
                    let (xr, xi) = (x[re + t].as_f64(), x[im + t].as_f64());
                    gx[re + t] += T::cst(2.0 * xr * acc);
                    gx[im + t] += T::cst(2.0 * xi * acc);
                }
            }
        }
    }
}

/// `tanh(r) / r` with its limit 1 at `r = 0`.
#[inline]
fn tanh_ratio(r: f64) -> f64 {
    if r < 1e-4 {
        1.0 - r * r / 3.0
    } else {
        r.tanh() / r
    }
}

/// `f'(r) / r` for `f = tanh(r) / r`, with its limit `-2/3` at 0.
#[inline]
fn tanh_ratio_slope(r: f64) -> f64 {
    if r < 1e-3 {
        -2.0 / 3.0 + 8.0 * r * r / 15.0
    } else {
        let sech = 1.0 / r.cosh();
        (r * sech * sech - r.tanh()) / (r * r * r)
    }
}

/// `ctanh(x) = tanh(|x|) x / |x|`, 0 at 0. `n` complex values in stacked halves.
pub fn ctanh_forward<T: Real>(x: &[T], n: usize, y: &mut [T]) {
    for i in 0..n {
        let (a, b) = (x[i].as_f64(), x[n + i].as_f64());
        let f = tanh_ratio(a.hypot(b));
        y[i] = T::cst(f * a);
        y[n + i] = T::cst(f * b);
    }
}

/// Adjoint of [`ctanh_forward`]: `g_x = f g_y + (f'/r) Re(conj(x) g_y) x`.
pub fn ctanh_backward<T: Real>(x: &[T], n: usize, gy: &[T], gx: &mut [T]) {
    for i in 0..n {
        let (a, b) = (x[i].as_f64(), x[n + i].as_f64());
        let r = a.hypot(b);
        let f = tanh_ratio(r);
        let k = tanh_ratio_slope(r);
        let (ga, gb) = (gy[i].as_f64(), gy[n + i].as_f64());
        let dot = a * ga + b * gb;
        gx[i] += T::cst(f * ga + k * dot * a);
        gx[n + i] += T::cst(f * gb + k * dot * b);
    }
}

/// Elementwise complex product of stacked halves.
pub fn cmul<T: Real>(a: &[T], b: &[T], out: &mut [T], n: usize) {
    for i in 0..n {
        let (ar, ai, br, bi) = (a[i], a[n + i], b[i], b[n + i]);
        out[i] = ar * br - ai * bi;
        out[n + i] = ar * bi + ai * br;
    }
}

/// Adjoint of [`cmul`]: `g_a += g conj(b)`, `g_b += g conj(a)`.
pub fn cmul_backward<T: Real>(a: &[T], b: &[T], g: &[T], n: usize, ga: &mut [T], gb: &mut [T]) {
    for i in 0..n {
        let (ar, ai, br, bi) = (a[i], a[n + i], b[i], b[n + i]);
        let (gr, gi) = (g[i], g[n + i]);
        ga[i] += gr * br + gi * bi;
        ga[n + i] += gi * br - gr * bi;
        gb[i] += gr * ar + gi * ai;
        gb[n + i] += gi * ar - gr * ai;
    }
}

/// Decoder basis `[Wr; -Wi]` as a `2C x kernel` matrix, so frame contributions are `D^T x`.
pub fn decoder_basis<T: Real>(wr: &[T], wi: &[T], channels: usize, kernel: usize) -> Vec<T> {
    let mut d = vec![T::zero(); 2 * channels * kernel];
    d[..channels * kernel].copy_from_slice(&wr[..channels * kernel]);
    for (o, v) in d[channels * kernel..].iter_mut().zip(wi) {
        *o = -*v;
    }
    d
}

/// Per-frame decoder contributions `kernel x frames` = `D^T x` for a dense `2C x frames` block.
pub fn decoder_frames<T: Real>(basis: &[T], channels: usize, kernel: usize, x: &[T], frames: usize) -> Vec<T> {
    let mut f = vec![T::zero(); kernel * frames];
    gemm(
        T::one(),
        MatRef::dense(basis, 2 * channels, kernel).t(),
        MatRef::dense(x, 2 * channels, frames),
        T::zero(),
        MatMut::dense(&mut f, kernel, frames),
    );
    f
}

/// Overlap-add per-frame contributions (`kernel x frames`) into `z`, frame
/// `j` starting at sample `stride*j - offset`; samples outside `z` are dropped.
pub fn overlap_add<T: Real>(contrib: &[T], kernel: usize, frames: usize, stride: usize, offset: usize, z: &mut [T]) {
    for tau in 0..kernel {
        let row = &contrib[tau * frames..(tau + 1) * frames];
        for (j, v) in row.iter().enumerate() {
            let n = (stride * j + tau) as isize - offset as isize;
            if n >= 0 && (n as usize) < z.len() {
                z[n as usize] += *v;
            }
        }
    }
}

/// Adjoint of [`overlap_add`]: gather `gz` back into `kernel x frames`.
pub fn overlap_gather<T: Real>(gz: &[T], kernel: usize, frames: usize, stride: usize, offset: usize) -> Vec<T> {
    let mut g = vec![T::zero(); kernel * frames];
    for tau in 0..kernel {
        for j in 0..frames {
            let n = (stride * j + tau) as isize - offset as isize;
            if n >= 0 && (n as usize) < gz.len() {
                g[tau * frames + j] = gz[n as usize];
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn conv_dense(packed: &[f64], o: usize, i: usize, k: usize, dil: usize, x: &[f64], frames_in: usize, pad: usize) -> Vec<f64> {
        let g = ConvGeom {
            rows_out: 2 * o,
            rows_in: 2 * i,
            kernel: k,
            dilation: dil,
            stride: 1,
            pad,
        };
        let fo = g.frames_out(frames_in);
        let mut y = vec![0.0; 2 * o * fo];
        conv_forward(packed, g, x, frames_in, &mut y, fo, fo);
        y
    }

    #[test]
    fn identity_and_rotation_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 2 * 3 * 10);
        let mut wr = vec![0.0; 9];
        let mut wi = vec![0.0; 9];
        for c in 0..3 {
            wr[c * 3 + c] = 1.0;
        }
        let y = conv_dense(&pack_complex(&wr, &wi, 3, 3, 1), 3, 3, 1, 1, &x, 10, 0);
        assert_eq!(y, x);
        std::mem::swap(&mut wr, &mut wi);
        let y = conv_dense(&pack_complex(&wr, &wi, 3, 3, 1), 3, 3, 1, 1, &x, 10, 0);
        // j (a + jb) = -b + ja
        for c in 0..3 {
            for t in 0..10 {
                assert_eq!(y[c * 10 + t], -x[(3 + c) * 10 + t]);
                assert_eq!(y[(3 + c) * 10 + t], x[c * 10 + t]);
            }
        }
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (o, i, k, dil, t) = (4, 3, 3, 2, 17);
        let wr = rand_vec(&mut rng, o * i * k);
        let wi = rand_vec(&mut rng, o * i * k);
        let x = rand_vec(&mut rng, 2 * i * t);
        let pad = (k - 1) * dil;
        let y = conv_dense(&pack_complex(&wr, &wi, o, i, k), o, i, k, dil, &x, t, pad);
        for oo in 0..o {
            for tt in 0..t {
                let mut acc = Complex64::new(0.0, 0.0);
                for ii in 0..i {
                    for kk in 0..k {
                        let src = tt as i64 - pad as i64 + (kk * dil) as i64;
                        if src < 0 {
                            continue;
                        }
                        let s = src as usize;
                        let w = Complex64::new(wr[(oo * i + ii) * k + kk], wi[(oo * i + ii) * k + kk]);
                        acc += w * Complex64::new(x[ii * t + s], x[(i + ii) * t + s]);
                    }
                }
                let got = Complex64::new(y[oo * t + tt], y[(o + oo) * t + tt]);
                assert!((got - acc).norm() <= 1e-6 * acc.norm().max(1.0));
            }
        }
    }

    #[test]
    fn trelu_examples() {
        let p = |rr: f64, ri: f64, ii: f64| vec![rr, ri, ii, 0.0, 0.0];
        let mut y = vec![0.0; 2];
        trelu_forward(&[3.0, -4.0], &p(1.0, 0.0, 1.0), 1, 1, &mut y);
        assert_eq!(y, vec![3.0, 0.0]);
        trelu_forward(&[1.0, -2.0], &p(1.0, 0.0, -1.0), 1, 1, &mut y);
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn trelu_matches_scalar_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (c, t) = (4, 9);
        let params = rand_vec(&mut rng, 5 * c);
        let x = rand_vec(&mut rng, 2 * c * t);
        let mut y = vec![0.0; 2 * c * t];
        trelu_forward(&x, &params, c, t, &mut y);
        for ch in 0..c {
            let (hrr, hri, hii, b1, b2) = (params[ch], params[c + ch], params[2 * c + ch], params[3 * c + ch], params[4 * c + ch]);
            for tt in 0..t {
                let (re, im) = (x[ch * t + tt], x[(c + ch) * t + tt]);
                assert_eq!(y[ch * t + tt], (hrr * re + hri * im + b1).max(0.0));
                assert_eq!(y[(c + ch) * t + tt], (hri * re + hii * im + b2).max(0.0));
            }
        }
    }

    #[test]
    fn ctanh_examples() {
        let mut y = vec![0.0f64; 2];
        ctanh_forward(&[0.0, 0.0], 1, &mut y);
        assert_eq!(y, vec![0.0, 0.0]);
        ctanh_forward(&[1.0, 0.0], 1, &mut y);
        assert!((y[0] - 0.761594).abs() < 1e-6 && y[1] == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_vec(&mut rng, 200).iter().map(|v| v * 5.0).collect::<Vec<_>>();
        let mut y = vec![0.0; 200];
        ctanh_forward(&x, 100, &mut y);
        for i in 0..100 {
            let a = Complex64::new(x[i], x[100 + i]);
            let b = Complex64::new(y[i], y[100 + i]);
            assert!(b.norm() < 1.0);
            assert!((a.arg() - b.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (c, t) = (3, 50);
        let ones = vec![1.0; c];
        let zeros = vec![0.0; c];
        // unit power per channel
        let mut x = rand_vec(&mut rng, 2 * c * t);
        for ch in 0..c {
            let p: f64 = (0..t).map(|i| x[ch * t + i].powi(2) + x[(c + ch) * t + i].powi(2)).sum::<f64>() / t as f64;
            for i in 0..t {
                x[ch * t + i] /= p.sqrt();
                x[(c + ch) * t + i] /= p.sqrt();
            }
        }
        let mut y = vec![0.0; 2 * c * t];
        norm_forward(&x, c, t, (&ones, &zeros), (&zeros, &zeros), 1e-8, NormMode::PerClip, &mut NormState::new(c), &mut y);
        for ch in 0..c {
            let p: f64 = (0..t).map(|i| y[ch * t + i].powi(2) + y[(c + ch) * t + i].powi(2)).sum::<f64>() / t as f64;
            assert!((p - 1.0).abs() < 1e-6);
        }
        let x10: Vec<f64> = x.iter().map(|v| v * 10.0).collect();
        let mut y10 = vec![0.0; 2 * c * t];
        norm_forward(&x10, c, t, (&ones, &zeros), (&zeros, &zeros), 1e-8, NormMode::PerClip, &mut NormState::new(c), &mut y10);
        for (a, b) in y.iter().zip(&y10) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn norm_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (c, t) = (2, 40);
        let x = rand_vec(&mut rng, 2 * c * t);
        let g = (rand_vec(&mut rng, c), rand_vec(&mut rng, c));
        let b = (rand_vec(&mut rng, c), rand_vec(&mut rng, c));
        let mut y = vec![0.0; 2 * c * t];
        norm_forward(&x, c, t, (&g.0, &g.1), (&b.0, &b.1), 1e-8, NormMode::PerClip, &mut NormState::new(c), &mut y);
        for ch in 0..c {
            // pass 1: mean power; pass 2: scale
            let vals: Vec<Complex64> = (0..t).map(|i| Complex64::new(x[ch * t + i], x[(c + ch) * t + i])).collect();
            let p = vals.iter().map(|v| v.norm_sqr()).sum::<f64>() / t as f64;
            for (i, v) in vals.iter().enumerate() {
                let e = Complex64::new(g.0[ch], g.1[ch]) * v / (p + 1e-8).sqrt() + Complex64::new(b.0[ch], b.1[ch]);
                let got = Complex64::new(y[ch * t + i], y[(c + ch) * t + i]);
                assert!((got - e).norm() <= 1e-6 * e.norm().max(1e-3));
            }
        }
    }

    #[test]
    fn cumulative_norm_is_chunk_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (c, t) = (2, 32);
        let x = rand_vec(&mut rng, 2 * c * t);
        let ones = vec![1.0; c];
        let zeros = vec![0.0; c];
        let mut whole = vec![0.0; 2 * c * t];
        norm_forward(&x, c, t, (&ones, &zeros), (&zeros, &zeros), 1e-8, NormMode::Cumulative, &mut NormState::new(c), &mut whole);
        let mut st = NormState::new(c);
        for chunk in 0..4 {
            let mut xb = vec![0.0; 2 * c * 8];
            for r in 0..2 * c {
                xb[r * 8..(r + 1) * 8].copy_from_slice(&x[r * t + chunk * 8..r * t + chunk * 8 + 8]);
            }
            let mut yb = vec![0.0; 2 * c * 8];
            norm_forward(&xb, c, 8, (&ones, &zeros), (&zeros, &zeros), 1e-8, NormMode::Cumulative, &mut st, &mut yb);
            for r in 0..2 * c {
                assert_eq!(&yb[r * 8..(r + 1) * 8], &whole[r * t + chunk * 8..r * t + chunk * 8 + 8]);
            }
        }
    }

    #[test]
    fn mask_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 12;
        let a = rand_vec(&mut rng, 2 * n);
        let mut one = vec![0.0; 2 * n];
        one[..n].iter_mut().for_each(|v| *v = 1.0);
        let mut out = vec![0.0; 2 * n];
        cmul(&a, &one, &mut out, n);
        assert_eq!(out, a);
        let mut j = vec![0.0; 2 * n];
        j[n..].iter_mut().for_each(|v| *v = 1.0);
        cmul(&a, &j, &mut out, n);
        for i in 0..n {
            assert_eq!(out[i], -a[n + i]);
            assert_eq!(out[n + i], a[i]);
        }
    }
}
