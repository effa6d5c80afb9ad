//! Mono 16-bit PCM WAV input/output.
//!
//! Samples are normalized to `[-1, 1]` by dividing the integer value by 32768.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

const FULL_SCALE: f64 = 32768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("mono required (file has {0} channels)")]
    NotMono(u16),
    #[error("unsupported sample format: {bits}-bit {format}")]
    UnsupportedBitDepth { bits: u16, format: &'static str },
    #[error("empty signal")]
    EmptySignal,
    #[error("sample {index} out of range: {value}")]
    OutOfRange { index: usize, value: f64 },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A mono waveform with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::EmptySignal);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::OutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Builds a signal by clamping every sample into `[-1, 1]`. NaN maps to 0.
    pub fn from_clamped(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Maps a normalized sample to int16: `round(s * 32768)` clamped.
pub fn to_pcm16(sample: f64) -> i16 {
    (sample * FULL_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn from_pcm16(value: i16) -> f64 {
    value as f64 / FULL_SCALE
}

pub fn read_pcm(path: impl AsRef<Path>) -> Result<Signal, AudioError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == io::ErrorKind::NotFound => {
            AudioError::NotFound(path.to_path_buf())
        }
        other => AudioError::Wav(other),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::NotMono(spec.channels));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        let format = match spec.sample_format {
            hound::SampleFormat::Int => "int",
            hound::SampleFormat::Float => "float",
        };
        return Err(AudioError::UnsupportedBitDepth {
            bits: spec.bits_per_sample,
            format,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(from_pcm16))
        .collect::<Result<Vec<_>, _>>()?;
    Signal::new(samples, spec.sample_rate)
}

pub fn write_pcm(signal: &Signal, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &signal.samples {
        writer.write_sample(to_pcm16(s))?;
    }
    writer.finalize()?;
    Ok(())
}
