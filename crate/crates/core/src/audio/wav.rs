//! Canonical WAV: RIFF/WAVE, 16-bit signed PCM, mono, 16 kHz.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};

const SCALE: f32 = 32768.0;

fn canonical_spec() -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: CANONICAL_SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn check_spec(spec: &WavSpec) -> Result<()> {
    let unsupported = |field, found: String, expected: &str| Error::UnsupportedFormat {
        field,
        found,
        expected: expected.to_string(),
    };
    if spec.sample_format != SampleFormat::Int {
        return Err(unsupported("sample_format", format!("{:?}", spec.sample_format), "Int"));
    }
    if spec.bits_per_sample != 16 {
        return Err(unsupported("bits_per_sample", spec.bits_per_sample.to_string(), "16"));
    }
    if spec.channels != 1 {
        return Err(unsupported("channels", spec.channels.to_string(), "1"));
    }
    if spec.sample_rate != CANONICAL_SAMPLE_RATE {
        return Err(unsupported("sample_rate", spec.sample_rate.to_string(), "16000"));
    }
    Ok(())
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    })?;
    check_spec(&reader.spec())?;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / SCALE))
        .collect::<std::result::Result<Vec<f32>, _>>()?;
    AudioClip::new(samples, CANONICAL_SAMPLE_RATE)
}

/// Quantizes to 16 bits; round-trip error is at most 1/32768.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = canonical_spec();
    check_spec(&WavSpec {
        sample_rate: clip.sample_rate,
        ..spec
    })?;
    let mut writer = WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    })?;
    for s in &clip.samples {
        let q = (s * SCALE).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16;
        writer.write_sample(q)?;
    }
    writer.finalize()?;
    Ok(())
}
