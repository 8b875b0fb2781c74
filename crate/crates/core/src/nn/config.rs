use serde::{Deserialize, Serialize};

use crate::beamformer::NUM_BEAMFORMERS;
use crate::{Error, Result, BLOCK_SIZE, SAMPLE_RATE};

/// Network hyperparameters. `stacks` is N, `layers` is M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Dilation growth factor; also the dilated kernel size.
    pub k: usize,
    pub stacks: usize,
    pub layers: usize,
    /// Hidden channels H inside a stack.
    pub hidden: usize,
    /// Encoder channels C (complex latent channels).
    pub encoder_channels: usize,
    /// Block channels D between stacks.
    pub block_channels: usize,
    pub mics: usize,
    #[serde(default = "default_kernel")]
    pub encoder_kernel: usize,
    #[serde(default = "default_stride")]
    pub encoder_stride: usize,
    /// Feed the three beamformer outputs in addition to the aligned mics.
    #[serde(default = "yes")]
    pub use_beamformers: bool,
    /// Use the same `h_ri` in both TReLU rows (as printed) or learn two.
    #[serde(default = "yes")]
    pub share_trelu: bool,
    #[serde(default = "default_norm_eps")]
    pub norm_epsilon: f64,
}

fn default_kernel() -> usize {
    32
}
fn default_stride() -> usize {
    8
}
fn yes() -> bool {
    true
}
fn default_norm_eps() -> f64 {
    1e-8
}

/// Output of [`ModelConfig::count_params_and_macs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchCounts {
    pub params: usize,
    pub macs_per_second: f64,
}

impl ModelConfig {
    pub fn new(k: usize, stacks: usize, layers: usize, hidden: usize, encoder_channels: usize, block_channels: usize, mics: usize) -> Self {
        ModelConfig {
            k,
            stacks,
            layers,
            hidden,
            encoder_channels,
            block_channels,
            mics,
            encoder_kernel: default_kernel(),
            encoder_stride: default_stride(),
            use_beamformers: true,
            share_trelu: true,
            norm_epsilon: default_norm_eps(),
        }
    }

    /// k=4, N=3, M=3, H=64, C=64, D=256 on a 6-mic array.
    pub fn hybridbeam() -> Self {
        Self::new(4, 3, 3, 64, 64, 256, 6)
    }

    /// k=3, N=4, M=4, H=96, C=64, D=256 on a 6-mic array.
    pub fn hybridbeam_plus() -> Self {
        Self::new(3, 4, 4, 96, 64, 256, 6)
    }

    /// Reduced configuration for desk-scale training.
    pub fn toy() -> Self {
        Self::new(4, 2, 2, 32, 32, 64, 6)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "hybridbeam" => Ok(Self::hybridbeam()),
            "hybridbeam-plus" | "hybridbeam+" => Ok(Self::hybridbeam_plus()),
            "toy" => Ok(Self::toy()),
            _ => Err(Error::Config(format!(
                "unknown model preset `{name}` (expected hybridbeam, hybridbeam-plus or toy)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if self.layers < 1 || self.stacks < 1 {
            return bad("need at least one stack and one layer per stack".into());
        }
        if self.hidden == 0 || self.encoder_channels == 0 || self.block_channels == 0 || self.mics == 0 {
            return bad("channel counts must be >= 1".into());
        }
        if self.encoder_stride == 0 || BLOCK_SIZE % self.encoder_stride != 0 {
            return bad(format!("encoder stride must divide the {BLOCK_SIZE}-sample block"));
        }
        if self.encoder_kernel < 2 * self.encoder_stride {
            return bad("encoder kernel must be at least twice the stride".into());
        }
        if self.frames_per_block() % (1 << (self.stacks - 1)) != 0 {
            return bad(format!(
                "{} stacks need {} frames per block, only {} available",
                self.stacks,
                1 << (self.stacks - 1),
                self.frames_per_block()
            ));
        }
        if !(self.norm_epsilon > 0.0) {
            return bad("norm_epsilon must be > 0".into());
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.mics + if self.use_beamformers { NUM_BEAMFORMERS } else { 0 }
    }

    /// Latent frames produced per 128-sample block.
    pub fn frames_per_block(&self) -> usize {
        BLOCK_SIZE / self.encoder_stride
    }

    /// Latent frames per second.
    pub fn frame_rate(&self) -> f64 {
        SAMPLE_RATE as f64 / self.encoder_stride as f64
    }

    /// Samples of future input an output sample depends on.
    pub fn lookahead_samples(&self) -> usize {
        self.encoder_kernel - self.encoder_stride
    }

    pub fn lookahead_ms(&self) -> f64 {
        self.lookahead_samples() as f64 * 1000.0 / SAMPLE_RATE as f64
    }

    /// Encoder frame `j` reads samples `[stride*j - encoder_pad, stride*j + stride)`.
    pub fn encoder_pad(&self) -> usize {
        self.encoder_kernel - self.encoder_stride
    }

    /// Decoder frame `j` writes samples starting at `stride*j - decoder_offset`.
    pub fn decoder_offset(&self) -> usize {
        self.encoder_kernel - 2 * self.encoder_stride + 1
    }

    /// Dilation of dilated layer `m` within a stack.
    pub fn dilation(&self, m: usize) -> usize {
        self.k.pow(m as u32)
    }

    /// Receptive field of the mask in latent frames, walking every layer:
    /// dilated convs add `(k-1) * dilation` frames at their rate, each
    /// downsampler one frame of the faster rate, and nearest-neighbour
    /// upsampling of a stack at rate `2^s` adds `2^s - 1`.
    pub fn receptive_field_frames(&self) -> usize {
        let mut back = 0usize;
        let mut best = 0usize;
        for s in 0..self.stacks {
            let scale = 1usize << s;
            if s > 0 {
                back += scale / 2;
            }
            for m in 0..self.layers {
                back += (self.k - 1) * self.dilation(m) * scale;
            }
            best = best.max(back + scale);
        }
        best
    }

    /// Input span, in samples, that influences one output sample.
    pub fn receptive_field_samples(&self) -> usize {
        let frames = self.receptive_field_frames();
        let s = self.encoder_stride;
        // encoder: (F-1)*s + kernel; decoder overlap adds kernel - s
        (frames - 1) * s + self.encoder_kernel + (self.encoder_kernel - s)
    }

    pub fn receptive_field(&self) -> f64 {
        self.receptive_field_samples() as f64 / SAMPLE_RATE as f64
    }

    /// Exact parameter count (one complex weight counts once) and
    /// multiply-accumulates per second (a complex multiply counts four).
    pub fn count_params_and_macs(&self) -> ArchCounts {
        let layout = super::weights::ParamLayout::new(self);
        let params = layout.tensors().iter().map(|t| t.count).sum();
        let fr = self.frame_rate();
        let mut macs = 0.0;
        macs += (2 * self.encoder_channels * self.input_channels() * self.encoder_kernel) as f64 * fr;
        for conv in layout.convs() {
            let per = conv.out_ch * conv.in_ch * conv.kernel;
            // one output frame per `stride` input frames
            macs += 4.0 * per as f64 * fr / (conv.rate_divisor * conv.stride) as f64;
        }
        macs += 2.0 * (self.encoder_channels * self.encoder_kernel) as f64 * fr;
        ArchCounts {
            params,
            macs_per_second: macs,
        }
    }
}
