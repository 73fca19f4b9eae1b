use std::io::Cursor;
use std::path::Path;

use crate::corpus::Span;
use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 8000;

/// Mono audio as normalized samples in [-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn slice(&self, span: Span) -> &[f64] {
        slice_samples(&self.samples, self.sample_rate, span)
    }
}

/// Samples covering `span`, clamped to the buffer.
pub fn slice_samples(samples: &[f64], sample_rate: u32, span: Span) -> &[f64] {
    let (a, b) = sample_range(samples.len(), sample_rate, span);
    &samples[a..b]
}

pub fn sample_range(len: usize, sample_rate: u32, span: Span) -> (usize, usize) {
    let sr = sample_rate as f64;
    let a = ((span.start * sr).round().max(0.0) as usize).min(len);
    let b = ((span.end * sr).round().max(0.0) as usize).min(len);
    (a, b.max(a))
}

/// Reads a 16-bit PCM mono WAV. Rates that are an integer multiple of 8 kHz
/// are decimated to 8 kHz; any other rate is rejected.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let reader = hound::WavReader::open(path)?;
    decode(reader)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<Audio> {
    decode(hound::WavReader::new(Cursor::new(bytes))?)
}

fn decode<R: std::io::Read>(reader: hound::WavReader<R>) -> Result<Audio> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::invalid(format!(
            "expected mono audio, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::invalid(format!(
            "expected 16-bit PCM, got {:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let raw = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (samples, sample_rate) = to_target_rate(raw, spec.sample_rate)?;
    Ok(Audio {
        samples,
        sample_rate,
    })
}

/// Nearest-neighbour decimation by an integer factor down to 8 kHz.
pub fn to_target_rate(samples: Vec<f64>, rate: u32) -> Result<(Vec<f64>, u32)> {
    if rate == TARGET_RATE {
        return Ok((samples, rate));
    }
    if rate < TARGET_RATE || !rate.is_multiple_of(TARGET_RATE) {
        return Err(Error::invalid(format!(
            "sample rate {rate} Hz is not an integer multiple of {TARGET_RATE} Hz"
        )));
    }
    let factor = (rate / TARGET_RATE) as usize;
    Ok((samples.into_iter().step_by(factor).collect(), TARGET_RATE))
}

fn spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut writer = hound::WavWriter::create(path, spec(sample_rate))?;
    for &s in samples {
        writer.write_sample(quantize(s))?;
    }
    writer.finalize()?;
    Ok(())
}

/// Encodes samples as an in-memory WAV file.
pub fn wav_bytes(samples: &[f64], sample_rate: u32) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec(sample_rate))?;
        for &s in samples {
            writer.write_sample(quantize(s))?;
        }
        writer.finalize()?;
    }
    Ok(cursor.into_inner())
}
