//! Backward-adaptive predictive coder.
//!
//! Every frame after the first retrains a committee of predictors on the
//! previously reconstructed frame. The decoder has the same reconstruction,
//! so no predictor coefficients are transmitted. Encoder and decoder share one
//! frame loop and differ only in where each codeword index comes from.

mod stream;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::audio::{AudioError, Signal};
use crate::bits::{BitReader, BitWriter};
use crate::mlp::{self, Committee, MlpError, TrainConfig};
use crate::scalar::{self, JayantQuantizer, QuantizerError, ScalarQuantizerConfig};
use crate::vq::{Codebook, VqError};

pub use stream::{EncodedStream, StreamHeader, STREAM_MAGIC, STREAM_VERSION};

pub const MAX_DIM: usize = 6;
pub const VQ_MIN_BITS: u32 = 5;
pub const VQ_MAX_BITS: u32 = 9;
/// Nominal frame length; rounded up to a multiple of the vector dimension.
pub const BASE_FRAME_LENGTH: usize = 200;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("mode s3 needs a codebook")]
    MissingCodebook,
    #[error("codebook mismatch: {0}")]
    CodebookMismatch(String),
    #[error("operation requires mode {expected}, config has {actual}")]
    WrongMode { expected: Mode, actual: Mode },
    #[error("corrupt stream: {0}")]
    Corrupt(String),
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("payload truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("training: {0}")]
    Training(#[from] MlpError),
    #[error("quantizer: {0}")]
    Quantizer(#[from] QuantizerError),
    #[error("vector quantizer: {0}")]
    Vq(#[from] VqError),
    #[error("signal: {0}")]
    Audio(#[from] AudioError),
}

impl CodecError {
    /// Errors caused by the stream bytes rather than the caller's arguments.
    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            CodecError::Corrupt(_) | CodecError::UnsupportedVersion(_) | CodecError::Truncated { .. }
        )
    }
}

/// Prediction and quantization scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Vector-trained predictor used as a scalar predictor (output 0 only),
    /// scalar quantizer, one sample per step.
    S1,
    /// Vector prediction, scalar quantizer applied to each residual component.
    S2,
    /// Vector prediction, vector quantizer on the residual vector.
    S3,
}

impl Mode {
    pub fn is_scalar(self) -> bool {
        !matches!(self, Mode::S3)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Mode::S1 => 1,
            Mode::S2 => 2,
            Mode::S3 => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Mode::S1),
            2 => Some(Mode::S2),
            3 => Some(Mode::S3),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::S1 => "s1",
            Mode::S2 => "s2",
            Mode::S3 => "s3",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Mode::S1),
            "s2" => Ok(Mode::S2),
            "s3" => Ok(Mode::S3),
            other => Err(format!("unknown mode {other:?} (expected s1, s2 or s3)")),
        }
    }
}

/// Smallest multiple of `dim` that is at least 200 samples.
pub fn default_frame_length(dim: usize) -> usize {
    BASE_FRAME_LENGTH.div_ceil(dim.max(1)) * dim.max(1)
}

/// 64-bit mix of the stream seed and a frame index.
pub fn frame_seed(seed: u64, frame: u64) -> u64 {
    splitmix64(seed ^ splitmix64(frame.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub inputs: usize,
    pub hidden: usize,
    pub dim: usize,
    pub bits: u32,
    pub mode: Mode,
    pub frame_length: usize,
    pub rng_seed: u64,
    /// `train.rng_seed` is ignored; each frame derives its own seed.
    pub train: TrainConfig,
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Step multipliers per magnitude level; empty for mode S3.
    pub multipliers: Vec<f64>,
}

impl CodecConfig {
    /// Default predictor (10 inputs, 2 hidden), frame length and quantizer
    /// tables for the given scenario.
    pub fn new(mode: Mode, dim: usize, bits: u32) -> Result<Self, CodecError> {
        let multipliers = if mode.is_scalar() {
            scalar::default_multipliers(bits)?
        } else {
            Vec::new()
        };
        let config = Self {
            inputs: mlp::DEFAULT_INPUTS,
            hidden: mlp::DEFAULT_HIDDEN,
            dim,
            bits,
            mode,
            frame_length: default_frame_length(dim),
            rng_seed: 0,
            train: TrainConfig::default(),
            initial_step: scalar::DEFAULT_INITIAL_STEP,
            step_min: scalar::DEFAULT_STEP_MIN,
            step_max: scalar::DEFAULT_STEP_MAX,
            multipliers,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::InvalidConfig(m));
        if !(1..=MAX_DIM).contains(&self.dim) {
            return bad(format!("vector dimension must be in [1, {MAX_DIM}], got {}", self.dim));
        }
        if self.inputs == 0 || self.inputs > u8::MAX as usize {
            return bad(format!("predictor inputs must be in [1, 255], got {}", self.inputs));
        }
        if self.hidden == 0 || self.hidden > u8::MAX as usize {
            return bad(format!("hidden units must be in [1, 255], got {}", self.hidden));
        }
        if self.frame_length == 0
            || self.frame_length > u16::MAX as usize
            || !self.frame_length.is_multiple_of(self.dim)
        {
            return bad(format!(
                "frame length {} must be a positive multiple of {} below 65536",
                self.frame_length, self.dim
            ));
        }
        if self.mode.is_scalar() {
            self.scalar_config()?.validate()?;
        } else {
            if !(VQ_MIN_BITS..=VQ_MAX_BITS).contains(&self.bits) {
                return bad(format!(
                    "vector quantizer bits must be in [{VQ_MIN_BITS}, {VQ_MAX_BITS}], got {}",
                    self.bits
                ));
            }
            if !self.multipliers.is_empty() {
                return bad("mode s3 takes no step multipliers".into());
            }
        }
        self.train.validate()?;
        if self.train.restarts > u8::MAX as usize || self.train.max_iterations > u16::MAX as usize
        {
            return bad("training restarts or iterations too large for the stream header".into());
        }
        Ok(())
    }

    pub fn scalar_config(&self) -> Result<ScalarQuantizerConfig, CodecError> {
        if !self.mode.is_scalar() {
            return Err(CodecError::WrongMode {
                expected: Mode::S2,
                actual: self.mode,
            });
        }
        Ok(ScalarQuantizerConfig {
            bits: self.bits,
            initial_step: self.initial_step,
            step_min: self.step_min,
            step_max: self.step_max,
            multipliers: self.multipliers.clone(),
        })
    }

    /// Payload bits per coded sample.
    pub fn bits_per_sample(&self) -> f64 {
        match self.mode {
            Mode::S3 => self.bits as f64 / self.dim as f64,
            _ => self.bits as f64,
        }
    }

    /// Samples after padding to whole frames.
    pub fn coded_len(&self, sample_count: usize) -> usize {
        sample_count.div_ceil(self.frame_length) * self.frame_length
    }

    /// Number of codeword indices carried for `sample_count` samples.
    pub fn index_count(&self, sample_count: usize) -> usize {
        let coded = self.coded_len(sample_count);
        match self.mode {
            Mode::S3 => coded / self.dim,
            _ => coded,
        }
    }

    fn check_codebook(&self, cb: &Codebook) -> Result<(), CodecError> {
        if cb.dim() != self.dim || cb.bits() != self.bits {
            return Err(CodecError::CodebookMismatch(format!(
                "codebook is {}-dimensional with {} bits, config wants {} and {}",
                cb.dim(),
                cb.bits(),
                self.dim,
                self.bits
            )));
        }
        Ok(())
    }
}

/// Supplies one codeword index per quantization step.
trait IndexSource {
    /// `pos` is the sample position in the padded signal.
    fn scalar(&mut self, pos: usize, prediction: f64, q: &JayantQuantizer) -> Result<u32, CodecError>;
    fn vector(&mut self, pos: usize, prediction: &[f64], cb: &Codebook) -> Result<u32, CodecError>;
}

struct EncoderSource<'a> {
    original: &'a [f64],
    writer: BitWriter,
    indices: Vec<u32>,
    bits: u32,
    dim: usize,
    residuals: Option<Vec<Vec<f64>>>,
    pending: Vec<f64>,
}

impl EncoderSource<'_> {
    fn emit(&mut self, index: u32) -> u32 {
        self.writer.write(index, self.bits);
        self.indices.push(index);
        index
    }
}

impl IndexSource for EncoderSource<'_> {
    fn scalar(&mut self, pos: usize, prediction: f64, q: &JayantQuantizer) -> Result<u32, CodecError> {
        let e = self.original[pos] - prediction;
        if let Some(out) = self.residuals.as_mut() {
            self.pending.push(e);
            if self.pending.len() == self.dim {
                out.push(std::mem::take(&mut self.pending));
            }
        }
        Ok(self.emit(q.select(e)))
    }

    fn vector(&mut self, pos: usize, prediction: &[f64], cb: &Codebook) -> Result<u32, CodecError> {
        let r: Vec<f64> = self.original[pos..pos + prediction.len()]
            .iter()
            .zip(prediction)
            .map(|(x, p)| x - p)
            .collect();
        let (index, _) = cb.nearest_unchecked(&r);
        if let Some(out) = self.residuals.as_mut() {
            out.push(r);
        }
        Ok(self.emit(index as u32))
    }
}

struct DecoderSource<'a> {
    reader: BitReader<'a>,
    bits: u32,
}

impl DecoderSource<'_> {
    fn next(&mut self) -> Result<u32, CodecError> {
        self.reader
            .read(self.bits)
            .ok_or_else(|| CodecError::Corrupt("payload ended early".into()))
    }
}

impl IndexSource for DecoderSource<'_> {
    fn scalar(&mut self, _: usize, _: f64, _: &JayantQuantizer) -> Result<u32, CodecError> {
        self.next()
    }

    fn vector(&mut self, _: usize, _: &[f64], _: &Codebook) -> Result<u32, CodecError> {
        self.next()
    }
}

/// The frame loop. Returns the reconstruction of the padded signal.
fn run_frames(
    config: &CodecConfig,
    codebook: Option<&Codebook>,
    coded_len: usize,
    source: &mut impl IndexSource,
) -> Result<Vec<f64>, CodecError> {
    let p = config.inputs;
    let n = config.dim;
    let len = config.frame_length;
    // zeros before the stream start: enough for the first training window
    let lead = p + n - 1;
    let mut recon = vec![0.0; lead + coded_len];
    let mut quantizer = match config.mode {
        Mode::S3 => None,
        _ => Some(JayantQuantizer::new(config.scalar_config()?)?),
    };
    let mut prediction = vec![0.0; n];

    for frame in 0..coded_len / len {
        let start = lead + frame * len;
        let committee = if frame == 0 {
            None
        } else {
            let patterns = mlp::build_training_patterns(&recon[..start], p, n, len)?;
            let train = TrainConfig {
                rng_seed: frame_seed(config.rng_seed, frame as u64),
                ..config.train.clone()
            };
            Some(mlp::multi_start_train(&patterns, config.hidden, &train)?)
        };
        let predict = |history: &[f64], out: &mut [f64]| match &committee {
            Some(c) => c.predict_into(history, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        };

        match config.mode {
            Mode::S1 => {
                let q = quantizer.as_mut().expect("scalar mode");
                for t in start..start + len {
                    let pred = committee
                        .as_ref()
                        .map_or(0.0, |c: &Committee| c.predict_first(&recon[t - p..t]));
                    let index = source.scalar(t - lead, pred, q)?;
                    recon[t] = (pred + q.apply(index)).clamp(-1.0, 1.0);
                }
            }
            Mode::S2 => {
                let q = quantizer.as_mut().expect("scalar mode");
                for t in (start..start + len).step_by(n) {
                    predict(&recon[t - p..t], &mut prediction);
                    for (i, &pred) in prediction.iter().enumerate() {
                        let index = source.scalar(t + i - lead, pred, q)?;
                        recon[t + i] = (pred + q.apply(index)).clamp(-1.0, 1.0);
                    }
                }
            }
            Mode::S3 => {
                let cb = codebook.ok_or(CodecError::MissingCodebook)?;
                for t in (start..start + len).step_by(n) {
                    predict(&recon[t - p..t], &mut prediction);
                    let index = source.vector(t - lead, &prediction, cb)? as usize;
                    for (i, (&pred, r)) in prediction.iter().zip(cb.vector(index)).enumerate() {
                        recon[t + i] = (pred + r).clamp(-1.0, 1.0);
                    }
                }
            }
        }
    }
    recon.drain(..lead);
    Ok(recon)
}

/// Result of encoding: the stream plus the encoder's own view of the output.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub stream: EncodedStream,
    /// Encoder-side reconstruction, trimmed to the input length.
    pub reconstruction: Vec<f64>,
    /// Codeword indices in transmission order.
    pub indices: Vec<u32>,
}

struct EncodeRun {
    indices: Vec<u32>,
    payload: Vec<u8>,
    reconstruction: Vec<f64>,
    residuals: Option<Vec<Vec<f64>>>,
}

fn encode_run(
    signal: &Signal,
    config: &CodecConfig,
    codebook: Option<&Codebook>,
    harvest: bool,
) -> Result<EncodeRun, CodecError> {
    config.validate()?;
    let cb = match (config.mode, codebook) {
        (Mode::S3, None) => return Err(CodecError::MissingCodebook),
        (Mode::S3, Some(cb)) => {
            config.check_codebook(cb)?;
            Some(cb.rounded_to_f32())
        }
        _ => None,
    };
    let coded_len = config.coded_len(signal.len());
    let mut padded = signal.samples().to_vec();
    padded.resize(coded_len, 0.0);
    let mut source = EncoderSource {
        original: &padded,
        writer: BitWriter::new(),
        indices: Vec::with_capacity(config.index_count(signal.len())),
        bits: config.bits,
        dim: config.dim,
        residuals: harvest.then(Vec::new),
        pending: Vec::with_capacity(config.dim),
    };
    let mut reconstruction = run_frames(config, cb.as_ref(), coded_len, &mut source)?;
    reconstruction.truncate(signal.len());
    Ok(EncodeRun {
        indices: source.indices,
        payload: source.writer.finish(),
        reconstruction,
        residuals: source.residuals,
    })
}

/// Encodes `signal`. In mode S3 the codebook (rounded to file precision) is
/// embedded in the stream header.
pub fn encode(
    signal: &Signal,
    config: &CodecConfig,
    codebook: Option<&Codebook>,
) -> Result<Encoded, CodecError> {
    let run = encode_run(signal, config, codebook, false)?;
    let header = StreamHeader {
        config: config.clone(),
        sample_count: signal.len() as u64,
        sample_rate: signal.sample_rate(),
        codebook: codebook.filter(|_| config.mode == Mode::S3).map(Codebook::rounded_to_f32),
    };
    Ok(Encoded {
        stream: EncodedStream {
            header,
            payload: run.payload,
        },
        reconstruction: run.reconstruction,
        indices: run.indices,
    })
}

/// Decodes a stream. An external codebook, if given, must agree with any
/// embedded one.
pub fn decode(stream: &EncodedStream, codebook: Option<&Codebook>) -> Result<Signal, CodecError> {
    Ok(decode_with_indices(stream, codebook)?.0)
}

/// Decodes and also returns the codeword indices read from the payload.
pub fn decode_with_indices(
    stream: &EncodedStream,
    codebook: Option<&Codebook>,
) -> Result<(Signal, Vec<u32>), CodecError> {
    let header = &stream.header;
    let config = &header.config;
    config.validate()?;
    let sample_count = usize::try_from(header.sample_count)
        .map_err(|_| CodecError::Corrupt("sample count too large".into()))?;
    if sample_count == 0 {
        return Err(CodecError::Corrupt("zero sample count".into()));
    }
    let expected = stream.expected_payload_len();
    if stream.payload.len() < expected {
        return Err(CodecError::Truncated {
            expected,
            actual: stream.payload.len(),
        });
    }
    if stream.payload.len() > expected {
        return Err(CodecError::Corrupt(format!(
            "{} trailing payload bytes",
            stream.payload.len() - expected
        )));
    }
    let cb = match config.mode {
        Mode::S3 => {
            let cb = match (codebook, &header.codebook) {
                (Some(ext), Some(emb)) => {
                    if ext.rounded_to_f32() != *emb {
                        return Err(CodecError::CodebookMismatch(
                            "supplied codebook differs from the embedded one".into(),
                        ));
                    }
                    emb.clone()
                }
                (Some(ext), None) => ext.rounded_to_f32(),
                (None, Some(emb)) => emb.clone(),
                (None, None) => return Err(CodecError::MissingCodebook),
            };
            config.check_codebook(&cb)?;
            Some(cb)
        }
        _ => None,
    };
    let coded_len = config.coded_len(sample_count);
    let mut source = DecoderSource {
        reader: BitReader::new(&stream.payload),
        bits: config.bits,
    };
    let mut samples = run_frames(config, cb.as_ref(), coded_len, &mut source)?;
    samples.truncate(sample_count);
    let indices = crate::bits::unpack(&stream.payload, config.bits, config.index_count(sample_count))
        .ok_or_else(|| CodecError::Corrupt("payload ended early".into()))?;
    Ok((Signal::new(samples, header.sample_rate)?, indices))
}

/// Unquantized residual vectors seen inside the closed loop of a mode-S2 run.
///
/// One vector per `dim` coded samples, padding included.
pub fn generate_residuals(signal: &Signal, config: &CodecConfig) -> Result<Vec<Vec<f64>>, CodecError> {
    if config.mode != Mode::S2 {
        return Err(CodecError::WrongMode {
            expected: Mode::S2,
            actual: config.mode,
        });
    }
    let run = encode_run(signal, config, None, true)?;
    Ok(run.residuals.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_config(mode: Mode, dim: usize, bits: u32) -> CodecConfig {
        let mut c = CodecConfig::new(mode, dim, bits).unwrap();
        c.frame_length = 40 * dim;
        c.train.restarts = 2;
        c.train.max_iterations = 10;
        c
    }

    fn tone(len: usize) -> Signal {
        let x = (0..len)
            .map(|i| 0.4 * (i as f64 * 0.07).sin() + 0.2 * (i as f64 * 0.31).sin())
            .collect();
        Signal::new(x, 8000).unwrap()
    }

    #[test]
    fn default_frame_lengths() {
        let got: Vec<usize> = (1..=6).map(default_frame_length).collect();
        assert_eq!(got, vec![200, 200, 201, 200, 200, 204]);
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::new(Mode::S1, 7, 3).is_err());
        assert!(CodecConfig::new(Mode::S2, 2, 6).is_err());
        assert!(CodecConfig::new(Mode::S3, 2, 4).is_err());
        assert!(CodecConfig::new(Mode::S3, 2, 9).is_ok());
        let mut c = CodecConfig::new(Mode::S2, 3, 3).unwrap();
        c.frame_length = 200;
        assert!(c.validate().is_err());
    }

    #[test]
    fn frame_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|f| frame_seed(7, f)).collect();
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
        assert_ne!(frame_seed(7, 1), frame_seed(8, 1));
    }

    #[test]
    fn s3_requires_matching_codebook() {
        let cfg = short_config(Mode::S3, 2, 5);
        let sig = tone(300);
        assert!(matches!(encode(&sig, &cfg, None), Err(CodecError::MissingCodebook)));
        let cb = Codebook::new(3, 5, vec![0.0; 32 * 3]).unwrap();
        assert!(matches!(
            encode(&sig, &cfg, Some(&cb)),
            Err(CodecError::CodebookMismatch(_))
        ));
    }

    #[test]
    fn round_trip_sync_each_mode() {
        let sig = tone(517);
        let cb = Codebook::new(
            2,
            5,
            (0..64).map(|i| ((i * 37 % 64) as f64 / 64.0 - 0.5) * 0.3).collect(),
        )
        .unwrap();
        for (mode, dim, bits) in [(Mode::S1, 2, 3), (Mode::S2, 2, 3), (Mode::S3, 2, 5)] {
            let cfg = short_config(mode, dim, bits).with_seed(11);
            let enc = encode(&sig, &cfg, Some(&cb)).unwrap();
            let dec = decode(&enc.stream, None).unwrap();
            assert_eq!(dec.len(), sig.len());
            assert_eq!(dec.samples(), enc.reconstruction.as_slice(), "{mode}");
            let (_, idx) = decode_with_indices(&enc.stream, None).unwrap();
            assert_eq!(idx, enc.indices);
        }
    }

    #[test]
    fn truncated_payload_detected() {
        let sig = tone(300);
        let cfg = short_config(Mode::S2, 2, 2);
        let mut enc = encode(&sig, &cfg, None).unwrap();
        enc.stream.payload.pop();
        assert!(matches!(
            decode(&enc.stream, None),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn residuals_require_s2() {
        let cfg = short_config(Mode::S1, 2, 3);
        assert!(matches!(
            generate_residuals(&tone(100), &cfg),
            Err(CodecError::WrongMode { .. })
        ));
    }

    #[test]
    fn residual_count_matches_coded_vectors() {
        for (len, dim) in [(333usize, 2usize), (500, 4), (81, 3)] {
            let cfg = short_config(Mode::S2, dim, 3);
            let res = generate_residuals(&tone(len), &cfg).unwrap();
            assert_eq!(res.len(), cfg.coded_len(len) / dim);
            assert!(res.iter().all(|r| r.len() == dim));
        }
    }
}
