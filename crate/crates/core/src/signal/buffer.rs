use crate::{Error, Real, Result, SAMPLE_RATE};

/// Channel-major audio: `c` channels of equal length at 16 kHz.
#[derive(Clone, Debug, PartialEq)]
pub struct MultichannelBuffer<T = f32> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
}

impl<T: Real> MultichannelBuffer<T> {
    pub fn new(channels: Vec<Vec<T>>) -> Result<Self> {
        Self::with_rate(channels, SAMPLE_RATE)
    }

    pub fn with_rate(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::Input(format!(
                "sample rate {sample_rate} Hz, only {SAMPLE_RATE} Hz is supported"
            )));
        }
        if channels.is_empty() {
            return Err(Error::Shape("buffer needs at least one channel".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels differ in length".into()));
        }
        if channels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite sample".into()));
        }
        Ok(MultichannelBuffer {
            channels,
            sample_rate,
        })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        MultichannelBuffer {
            channels: vec![vec![T::zero(); len]; channels.max(1)],
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, i: usize) -> &[T] {
        &self.channels[i]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<T>> {
        self.channels
    }

    /// Samples `[start, start + len)` of every channel, zero-filled past the end.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                (start..start + len)
                    .map(|i| c.get(i).copied().unwrap_or_else(T::zero))
                    .collect()
            })
            .collect();
        MultichannelBuffer {
            channels,
            sample_rate: self.sample_rate,
        }
    }

    pub fn cast<U: Real>(&self) -> MultichannelBuffer<U> {
        MultichannelBuffer {
            channels: self
                .channels
                .iter()
                .map(|c| c.iter().map(|&x| U::cst(x.as_f64())).collect())
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Interleaved frame-major samples.
    pub fn interleaved(&self) -> Vec<T> {
        let c = self.num_channels();
        let mut out = Vec::with_capacity(c * self.len());
        for t in 0..self.len() {
            for ch in &self.channels {
                out.push(ch[t]);
            }
        }
        out
    }

    pub fn from_interleaved(data: &[T], channels: usize) -> Result<Self> {
        if channels == 0 || data.len() % channels != 0 {
            return Err(Error::Shape(format!(
                "{} interleaved samples do not split into {channels} channels",
                data.len()
            )));
        }
        let len = data.len() / channels;
        let chans = (0..channels)
            .map(|c| (0..len).map(|t| data[t * channels + c]).collect())
            .collect();
        Self::new(chans)
    }
}
