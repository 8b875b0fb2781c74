//! WAV reading and writing: PCM16 or IEEE float32, 1 to 8 channels, 16 kHz only.

use std::path::Path;

use super::MultichannelBuffer;
use crate::{Error, Result, SAMPLE_RATE};

pub const MAX_CHANNELS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

fn wav_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelBuffer<f32>> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(wav_err(
            path,
            format!("sample rate {} Hz, expected {SAMPLE_RATE} Hz", spec.sample_rate),
        ));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > MAX_CHANNELS {
        return Err(wav_err(path, format!("{channels} channels, supported 1..={MAX_CHANNELS}")));
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e.to_string()))?,
        (fmt, bits) => {
            return Err(wav_err(path, format!("unsupported sample format {fmt:?} {bits}-bit")));
        }
    };
    MultichannelBuffer::from_interleaved(&samples, channels).map_err(|e| wav_err(path, e.to_string()))
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so a failed write never leaves a partial file behind.
pub fn write_wav(path: impl AsRef<Path>, buffer: &MultichannelBuffer<f32>, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let channels = buffer.num_channels();
    if channels > MAX_CHANNELS {
        return Err(wav_err(path, format!("{channels} channels, supported 1..={MAX_CHANNELS}")));
    }
    let spec = hound::WavSpec {
        channels: channels as u16,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let tmp = temp_sibling(path);
    let result = (|| -> std::result::Result<(), hound::Error> {
        let mut w = hound::WavWriter::create(&tmp, spec)?;
        for s in buffer.interleaved() {
            match format {
                WavFormat::Pcm16 => w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?,
                WavFormat::Float32 => w.write_sample(s)?,
            }
        }
        w.finalize()
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(wav_err(path, e.to_string()));
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}
