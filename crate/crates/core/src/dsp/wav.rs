//! WAV reading and writing: 16-bit PCM or 32-bit IEEE float, mono.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Signal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads a WAV file. Multichannel files keep channel 0 (a warning is logged).
pub fn read_wav(path: &Path) -> Result<Signal> {
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels > 1 {
        log::warn!("{}: {channels} channels, using channel 0", path.display());
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>().map_err(wav_err)?
        }
        (fmt, bits) => {
            return Err(Error::parse(
                path.display().to_string(),
                format!("unsupported WAV encoding {fmt:?} {bits}-bit"),
            ))
        }
    };
    let samples = interleaved.into_iter().step_by(channels.max(1)).collect();
    Signal::new(samples, spec.sample_rate as f64)
}

pub fn write_wav(path: &Path, sig: &Signal, format: WavFormat) -> Result<()> {
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let rate = sig.rate();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::invalid("WAV needs an integer sample rate"));
    }
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec { channels: 1, sample_rate: rate as u32, bits_per_sample: bits, sample_format };
    let mut w = WavWriter::create(path, spec).map_err(wav_err)?;
    for &v in sig.samples() {
        match format {
            WavFormat::Pcm16 => {
                let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                w.write_sample(q).map_err(wav_err)?;
            }
            WavFormat::Float32 => w.write_sample(v as f32).map_err(wav_err)?,
        }
    }
    w.finalize().map_err(wav_err)
}
