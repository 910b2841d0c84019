//! PCM16 mono WAV input.

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};
use tmfuse_core::features::Waveform;

use crate::error::{Error, Result};

/// Reads a 16-bit PCM mono file, scaling samples by `1 / 32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => Error::io(path, io),
        e => Error::format(path, format!("header: {e}")),
    })?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(Error::format(path, "format=float, expected 16-bit PCM"));
    }
    if spec.channels != 1 {
        return Err(Error::format(path, format!("channels={}, expected mono", spec.channels)));
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::format(path, format!("bits_per_sample={}, expected 16", spec.bits_per_sample)));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(path, format!("data: {e}")))?;
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

/// Writes 16-bit PCM mono.
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[i16], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        e => Error::Internal(format!("writing {}: {e}", path.display())),
    };
    let mut w = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        w.write_sample(s).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}
