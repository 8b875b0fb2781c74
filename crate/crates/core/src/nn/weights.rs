//! Parameter layout, initialization and the checkpoint format.
//!
//! All parameters live in one flat vector. A complex tensor of `n` elements
//! occupies `2n` slots: the `n` real parts, then the `n` imaginary parts.
//! Tensors appear in this fixed order:
//!
//! 1. `encoder` (real, `2C x (c+3) x 32`; rows `0..C` are real parts of the latent, `C..2C` imaginary)
//! 2. per stack `s`: `down` (s > 0), `in`, `layer{m}` for each dilated layer, `skip`, `out` (s < N-1);
//!    every conv has `.w` (complex, `out x in x kernel`) and `.b` (complex, `out`); `in` and
//!    `layer{m}` add `.trelu` (real, `5 x H`: h_rr, h_ri, h_ii, b1, b2, plus h_ir when unshared),
//!    `.gamma` and `.beta` (complex, `H`)
//! 3. `head.w`, `head.b` (complex, `C x C x 1`, `C`)
//! 4. `decoder` (complex, `C x kernel`)
//!
//! Checkpoint file (little endian): magic `DIRHEAR1`, u32 format version,
//! u32 byte length of the TOML-serialized [`ModelConfig`], the TOML text,
//! u64 float count, then that many f32 values in the order above.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::signal::wav::temp_sibling;
use crate::{Error, Real, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DIRHEAR1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    /// Element count (complex elements count once).
    pub count: usize,
    /// Offset of the first real slot in the flat vector.
    pub offset: usize,
}

impl TensorInfo {
    pub fn storage(&self) -> usize {
        match self.kind {
            TensorKind::Real => self.count,
            TensorKind::Complex => 2 * self.count,
        }
    }
}

/// One convolution: tensor ids plus geometry. `pad` is the causal left
/// padding in input frames; output frame `u` reads input frames
/// `stride*u - pad + kk*dilation`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec {
    pub weight: usize,
    pub bias: usize,
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
    pub pad: usize,
    /// Input frame rate relative to the latent rate (`2^s`).
    pub rate_divisor: usize,
}

/// Conv followed by TReLU and normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub conv: ConvSpec,
    pub trelu: usize,
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackSpec {
    pub down: Option<ConvSpec>,
    pub input: LayerSpec,
    pub layers: Vec<LayerSpec>,
    pub skip: ConvSpec,
    pub out: Option<ConvSpec>,
    /// `2^s`
    pub rate_divisor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    tensors: Vec<TensorInfo>,
    pub encoder: usize,
    pub stacks: Vec<StackSpec>,
    /// Absent only for the degenerate zero-stack layout used in counting.
    pub head: Option<ConvSpec>,
    pub decoder: usize,
    total: usize,
}

struct Builder {
    tensors: Vec<TensorInfo>,
    total: usize,
}

impl Builder {
    fn add(&mut self, name: String, kind: TensorKind, shape: Vec<usize>) -> usize {
        let count = shape.iter().product();
        let info = TensorInfo {
            name,
            kind,
            shape,
            count,
            offset: self.total,
        };
        self.total += info.storage();
        self.tensors.push(info);
        self.tensors.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, name: &str, out_ch: usize, in_ch: usize, kernel: usize, dilation: usize, stride: usize, pad: usize, rate_divisor: usize) -> ConvSpec {
        let weight = self.add(format!("{name}.w"), TensorKind::Complex, vec![out_ch, in_ch, kernel]);
        let bias = self.add(format!("{name}.b"), TensorKind::Complex, vec![out_ch]);
        ConvSpec {
            weight,
            bias,
            out_ch,
            in_ch,
            kernel,
            dilation,
            stride,
            pad,
            rate_divisor,
        }
    }

    fn layer(&mut self, name: &str, conv: ConvSpec, trelu_rows: usize) -> LayerSpec {
        let h = conv.out_ch;
        let trelu = self.add(format!("{name}.trelu"), TensorKind::Real, vec![trelu_rows, h]);
        let gamma = self.add(format!("{name}.gamma"), TensorKind::Complex, vec![h]);
        let beta = self.add(format!("{name}.beta"), TensorKind::Complex, vec![h]);
        LayerSpec {
            conv,
            trelu,
            gamma,
            beta,
        }
    }
}

impl ParamLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let c = config.encoder_channels;
        let d = config.block_channels;
        let h = config.hidden;
        let trelu_rows = if config.share_trelu { 5 } else { 6 };
        let mut b = Builder {
            tensors: Vec::new(),
            total: 0,
        };
        let encoder = b.add(
            "encoder".into(),
            TensorKind::Real,
            vec![2 * c, config.input_channels(), config.encoder_kernel],
        );
        let mut stacks = Vec::with_capacity(config.stacks);
        for s in 0..config.stacks {
            let rate = 1usize << s;
            let down = (s > 0).then(|| b.conv(&format!("stack{s}.down"), d, d, 2, 1, 2, 1, rate / 2));
            let in_ch = if s == 0 { c } else { d };
            let conv = b.conv(&format!("stack{s}.in"), h, in_ch, 1, 1, 1, 0, rate);
            let input = b.layer(&format!("stack{s}.in"), conv, trelu_rows);
            let layers = (0..config.layers)
                .map(|m| {
                    let dil = config.dilation(m);
                    let name = format!("stack{s}.layer{m}");
                    let conv = b.conv(&name, h, h, config.k, dil, 1, (config.k - 1) * dil, rate);
                    b.layer(&name, conv, trelu_rows)
                })
                .collect();
            let skip = b.conv(&format!("stack{s}.skip"), c, h, 1, 1, 1, 0, rate);
            let out = (s + 1 < config.stacks).then(|| b.conv(&format!("stack{s}.out"), d, h, 1, 1, 1, 0, rate));
            stacks.push(StackSpec {
                down,
                input,
                layers,
                skip,
                out,
                rate_divisor: rate,
            });
        }
        let head = (config.stacks > 0).then(|| b.conv("head", c, c, 1, 1, 1, 0, 1));
        let decoder = b.add("decoder".into(), TensorKind::Complex, vec![c, config.encoder_kernel]);
        ParamLayout {
            tensors: b.tensors,
            encoder,
            stacks,
            head,
            decoder,
            total: b.total,
        }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    /// Total number of real slots.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Every complex conv in forward order.
    pub fn convs(&self) -> Vec<&ConvSpec> {
        let mut v = Vec::new();
        for s in &self.stacks {
            v.extend(s.down.iter());
            v.push(&s.input.conv);
            v.extend(s.layers.iter().map(|l| &l.conv));
            v.push(&s.skip);
            v.extend(s.out.iter());
        }
        v.extend(self.head.iter());
        v
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }
}

/// Trained (or freshly initialized) parameters for one [`ModelConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<T> {
    config: ModelConfig,
    layout: ParamLayout,
    data: Vec<T>,
}

impl<T: Real> ModelWeights<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(config);
        Ok(ModelWeights {
            data: vec![T::zero(); layout.len()],
            config: config.clone(),
            layout,
        })
    }

    /// Complex Glorot init (Rayleigh magnitude with `sigma = 1/sqrt(fan_in + fan_out)`,
    /// uniform phase), zero biases, TReLU at the CReLU point, unit norm scale.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut w = Self::zeros(config)?;
        let layout = w.layout.clone();
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        for (id, t) in layout.tensors().iter().enumerate() {
            let name = t.name.as_str();
            if name.ends_with(".b") || name.ends_with(".beta") {
                continue;
            }
            if name.ends_with(".gamma") {
                w.re_mut(id).iter_mut().for_each(|v| *v = T::one());
                continue;
            }
            if name.ends_with(".trelu") {
                let h = t.shape[1];
                let data = w.tensor_mut(id);
                data[..h].iter_mut().for_each(|v| *v = T::one());
                data[2 * h..3 * h].iter_mut().for_each(|v| *v = T::one());
                continue;
            }
            match t.kind {
                TensorKind::Real => {
                    // encoder: real Glorot uniform
                    let fan_in = t.shape[1] * t.shape[2];
                    let fan_out = t.shape[0] * t.shape[2];
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in w.tensor_mut(id) {
                        *v = T::cst(rng.random_range(-a..a));
                    }
                }
                TensorKind::Complex => {
                    let (fan_in, fan_out) = if t.shape.len() == 3 {
                        (t.shape[1] * t.shape[2], t.shape[0] * t.shape[2])
                    } else {
                        (t.shape[0], t.shape[1])
                    };
                    let sigma = 1.0 / ((fan_in + fan_out) as f64).sqrt();
                    let n = t.count;
                    let data = w.tensor_mut(id);
                    for i in 0..n {
                        // Rayleigh(sigma) = sigma * |N(0,1) + jN(0,1)|
                        let a: f64 = std_normal.sample(rng);
                        let b: f64 = std_normal.sample(rng);
                        let mag = sigma * (a * a + b * b).sqrt();
                        let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                        data[i] = T::cst(mag * phase.cos());
                        data[n + i] = T::cst(mag * phase.sin());
                    }
                }
            }
        }
        Ok(w)
    }

    pub fn from_vec(config: &ModelConfig, data: Vec<T>) -> Result<Self> {
        let mut w = Self::zeros(config)?;
        if data.len() != w.data.len() {
            return Err(Error::Shape(format!(
                "config needs {} parameters, got {}",
                w.data.len(),
                data.len()
            )));
        }
        w.data = data;
        Ok(w)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn tensor(&self, id: usize) -> &[T] {
        let t = &self.layout.tensors[id];
        &self.data[t.offset..t.offset + t.storage()]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut [T] {
        let t = &self.layout.tensors[id];
        &mut self.data[t.offset..t.offset + t.storage()]
    }

    pub fn re(&self, id: usize) -> &[T] {
        let t = &self.layout.tensors[id];
        &self.data[t.offset..t.offset + t.count]
    }

    pub fn im(&self, id: usize) -> &[T] {
        let t = &self.layout.tensors[id];
        assert_eq!(t.kind, TensorKind::Complex, "{} is real", t.name);
        &self.data[t.offset + t.count..t.offset + 2 * t.count]
    }

    pub fn re_mut(&mut self, id: usize) -> &mut [T] {
        let t = &self.layout.tensors[id];
        &mut self.data[t.offset..t.offset + t.count]
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        ModelWeights {
            config: self.config.clone(),
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| U::cst(v.as_f64())).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let cfg = toml::to_string(&self.config).map_err(|e| Error::Internal(e.to_string()))?;
        let mut bytes = Vec::with_capacity(32 + cfg.len() + 4 * self.data.len());
        bytes.extend_from_slice(CHECKPOINT_MAGIC);
        bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        bytes.extend_from_slice(cfg.as_bytes());
        bytes.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        for v in &self.data {
            bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        write_atomic(path, &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Checkpoint(m.to_string());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| err("truncated file"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != CHECKPOINT_MAGIC {
            return Err(err("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let cfg_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let cfg_text = std::str::from_utf8(take(cfg_len)?).map_err(|_| err("config is not UTF-8"))?;
        let config: ModelConfig = toml::from_str(cfg_text).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        config.validate()?;
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let layout = ParamLayout::new(&config);
        if n != layout.len() {
            return Err(Error::Checkpoint(format!(
                "config needs {} floats, file declares {n}",
                layout.len()
            )));
        }
        let raw = take(4 * n)?;
        if pos != bytes.len() {
            return Err(err("trailing bytes"));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| T::cst(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(ModelWeights { config, layout, data })
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = std::fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(&tmp, e));
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_counts_within_tolerance() {
        let hb = ModelConfig::hybridbeam().count_params_and_macs();
        assert!((hb.params as f64 / 0.72e6 - 1.0).abs() < 0.3, "{}", hb.params);
        assert!((hb.macs_per_second / 2.1e9 - 1.0).abs() < 0.3, "{}", hb.macs_per_second);
        let plus = ModelConfig::hybridbeam_plus().count_params_and_macs();
        assert!((plus.params as f64 / 1.1e6 - 1.0).abs() < 0.3, "{}", plus.params);
        assert!((plus.macs_per_second / 2.8e9 - 1.0).abs() < 0.3, "{}", plus.macs_per_second);
    }

    #[test]
    fn layout_is_contiguous() {
        let l = ParamLayout::new(&ModelConfig::toy());
        let mut off = 0;
        for t in l.tensors() {
            assert_eq!(t.offset, off);
            off += t.storage();
        }
        assert_eq!(off, l.len());
        assert!(l.find("stack1.down.w").is_some());
        assert!(l.find("stack0.down.w").is_none());
        assert!(l.find("stack1.out.w").is_none());
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let cfg = ModelConfig::toy();
        let w = ModelWeights::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        w.save(&p).unwrap();
        let back = ModelWeights::<f32>::load(&p).unwrap();
        assert_eq!(back, w);
        let bytes = std::fs::read(&p).unwrap();
        assert!(ModelWeights::<f32>::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelWeights::<f32>::from_bytes(&bad).is_err());
    }

    #[test]
    fn init_is_crelu_identity() {
        let cfg = ModelConfig::toy();
        let w = ModelWeights::<f64>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let id = w.layout().find("stack0.layer1.trelu").unwrap();
        let t = w.tensor(id);
        let h = cfg.hidden;
        assert!(t[..h].iter().all(|v| *v == 1.0));
        assert!(t[h..2 * h].iter().all(|v| *v == 0.0));
        assert!(t[2 * h..3 * h].iter().all(|v| *v == 1.0));
        assert!(t[3 * h..].iter().all(|v| *v == 0.0));
    }
}
