//! NLPQ stream serialization.
//!
//! Layout (little-endian):
//!
//! ```text
//! "NLPQ" | version u8 | mode u8 | P u8 | hidden u8 | N u8 | Nq u8
//! frame_length u16 | rng_seed u64 | sample_count u64
//! codebook flag u8 [+ NLVQ codebook]
//! initial_step f64 | step_min f64 | step_max f64 | multiplier count u8 | multipliers f64...
//! sample_rate u32 | restarts u8 | max_iterations u16
//! lambda_init f64 | lambda_up f64 | lambda_down f64 | cost_tolerance f64
//! regularization u8 (0 fixed, 1 bayesian) | alpha f64 | beta f64
//! payload: indices, Nq bits each, MSB-first, zero-padded to a byte
//! ```

use std::path::Path;

use super::{CodecConfig, CodecError, Mode};
use crate::bits::packed_len;
use crate::mlp::{Regularization, TrainConfig};
use crate::vq::Codebook;

pub const STREAM_MAGIC: &[u8; 4] = b"NLPQ";
pub const STREAM_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub config: CodecConfig,
    pub sample_count: u64,
    pub sample_rate: u32,
    pub codebook: Option<Codebook>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub payload: Vec<u8>,
}

impl EncodedStream {
    pub fn expected_payload_len(&self) -> usize {
        let config = &self.header.config;
        packed_len(
            config.index_count(self.header.sample_count as usize),
            config.bits,
        )
    }

    /// Bits in the payload, padding excluded.
    pub fn payload_bits(&self) -> usize {
        let config = &self.header.config;
        config.index_count(self.header.sample_count as usize) * config.bits as usize
    }

    /// Payload bits per coded (padded) sample.
    pub fn bits_per_coded_sample(&self) -> f64 {
        let config = &self.header.config;
        self.payload_bits() as f64 / config.coded_len(self.header.sample_count as usize) as f64
    }

    pub fn without_codebook(mut self) -> Self {
        self.header.codebook = None;
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let c = &h.config;
        let mut out = Vec::with_capacity(128 + self.payload.len());
        out.extend_from_slice(STREAM_MAGIC);
        out.push(STREAM_VERSION);
        out.push(c.mode.code());
        out.push(c.inputs as u8);
        out.push(c.hidden as u8);
        out.push(c.dim as u8);
        out.push(c.bits as u8);
        out.extend_from_slice(&(c.frame_length as u16).to_le_bytes());
        out.extend_from_slice(&c.rng_seed.to_le_bytes());
        out.extend_from_slice(&h.sample_count.to_le_bytes());
        match &h.codebook {
            Some(cb) => {
                out.push(1);
                out.extend_from_slice(&cb.to_bytes());
            }
            None => out.push(0),
        }
        for v in [c.initial_step, c.step_min, c.step_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(c.multipliers.len() as u8);
        for m in &c.multipliers {
            out.extend_from_slice(&m.to_le_bytes());
        }
        out.extend_from_slice(&h.sample_rate.to_le_bytes());
        let t = &c.train;
        out.push(t.restarts as u8);
        out.extend_from_slice(&(t.max_iterations as u16).to_le_bytes());
        for v in [t.lambda_init, t.lambda_up, t.lambda_down, t.cost_tolerance] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let (tag, a, b) = match t.regularization {
            Regularization::Fixed { alpha, beta } => (0u8, alpha, beta),
            Regularization::Bayesian {
                alpha_init,
                beta_init,
            } => (1u8, alpha_init, beta_init),
        };
        out.push(tag);
        out.extend_from_slice(&a.to_le_bytes());
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses header and payload. The payload length is not checked here;
    /// decoding reports truncation.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != STREAM_MAGIC {
            return Err(CodecError::Corrupt("bad magic".into()));
        }
        let version = r.u8()?;
        if version != STREAM_VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        let mode_code = r.u8()?;
        let mode = Mode::from_code(mode_code)
            .ok_or_else(|| CodecError::Corrupt(format!("unknown mode {mode_code}")))?;
        let inputs = r.u8()? as usize;
        let hidden = r.u8()? as usize;
        let dim = r.u8()? as usize;
        let bits = r.u8()? as u32;
        let frame_length = r.u16()? as usize;
        let rng_seed = r.u64()?;
        let sample_count = r.u64()?;
        let codebook = match r.u8()? {
            0 => None,
            1 => {
                let (cb, used) = Codebook::parse(&bytes[r.pos..])
                    .map_err(|e| CodecError::Corrupt(format!("embedded codebook: {e}")))?;
                r.pos += used;
                Some(cb)
            }
            f => return Err(CodecError::Corrupt(format!("bad codebook flag {f}"))),
        };
        let initial_step = r.f64()?;
        let step_min = r.f64()?;
        let step_max = r.f64()?;
        let count = r.u8()? as usize;
        let multipliers = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let sample_rate = r.u32()?;
        let restarts = r.u8()? as usize;
        let max_iterations = r.u16()? as usize;
        let lambda_init = r.f64()?;
        let lambda_up = r.f64()?;
        let lambda_down = r.f64()?;
        let cost_tolerance = r.f64()?;
        let tag = r.u8()?;
        let (a, b) = (r.f64()?, r.f64()?);
        let regularization = match tag {
            0 => Regularization::Fixed { alpha: a, beta: b },
            1 => Regularization::Bayesian {
                alpha_init: a,
                beta_init: b,
            },
            t => return Err(CodecError::Corrupt(format!("bad regularization tag {t}"))),
        };
        let config = CodecConfig {
            inputs,
            hidden,
            dim,
            bits,
            mode,
            frame_length,
            rng_seed,
            train: TrainConfig {
                max_iterations,
                lambda_init,
                lambda_up,
                lambda_down,
                cost_tolerance,
                regularization,
                restarts,
                rng_seed: 0,
            },
            initial_step,
            step_min,
            step_max,
            multipliers,
        };
        config
            .validate()
            .map_err(|e| CodecError::Corrupt(format!("header: {e}")))?;
        if sample_count == 0 {
            return Err(CodecError::Corrupt("zero sample count".into()));
        }
        Ok(Self {
            header: StreamHeader {
                config,
                sample_count,
                sample_rate,
                codebook,
            },
            payload: bytes[r.pos..].to_vec(),
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CodecError::Corrupt("header truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stream(mode: Mode) -> EncodedStream {
        let (dim, bits) = if mode == Mode::S3 { (2, 5) } else { (2, 3) };
        let config = CodecConfig::new(mode, dim, bits).unwrap().with_seed(0xdead_beef);
        let codebook = (mode == Mode::S3)
            .then(|| Codebook::new(2, 5, (0..64).map(|i| i as f64 * 0.25).collect()).unwrap());
        let header = StreamHeader {
            config,
            sample_count: 401,
            sample_rate: 8000,
            codebook,
        };
        let mut s = EncodedStream {
            header,
            payload: vec![],
        };
        s.payload = (0..s.expected_payload_len()).map(|i| i as u8).collect();
        s
    }

    #[test]
    fn header_layout_prefix() {
        let bytes = sample_stream(Mode::S2).to_bytes();
        assert_eq!(&bytes[..4], b"NLPQ");
        assert_eq!(bytes[4], STREAM_VERSION);
        assert_eq!(&bytes[5..10], &[2, 10, 2, 2, 3]);
        assert_eq!(u16::from_le_bytes([bytes[10], bytes[11]]), 200);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 0xdead_beef);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 401);
        assert_eq!(bytes[28], 0);
    }

    #[test]
    fn parse_round_trip() {
        for mode in [Mode::S1, Mode::S2, Mode::S3] {
            let s = sample_stream(mode);
            assert_eq!(EncodedStream::from_bytes(&s.to_bytes()).unwrap(), s);
        }
    }

    #[test]
    fn version_and_magic_errors() {
        let mut bytes = sample_stream(Mode::S1).to_bytes();
        bytes[4] ^= 0xff;
        assert!(matches!(
            EncodedStream::from_bytes(&bytes),
            Err(CodecError::UnsupportedVersion(_))
        ));
        let mut bytes = sample_stream(Mode::S1).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(EncodedStream::from_bytes(&bytes), Err(CodecError::Corrupt(_))));
        let bytes = sample_stream(Mode::S3).to_bytes();
        assert!(matches!(
            EncodedStream::from_bytes(&bytes[..40]),
            Err(CodecError::Corrupt(_))
        ));
    }

    #[test]
    fn invalid_field_is_corruption() {
        let mut bytes = sample_stream(Mode::S2).to_bytes();
        bytes[8] = 9; // N = 9
        let err = EncodedStream::from_bytes(&bytes).unwrap_err();
        assert!(err.is_corruption());
    }

    #[test]
    fn rate_accounting_s3() {
        let s = sample_stream(Mode::S3);
        // 401 samples pad to 600, 300 vectors of 5 bits
        assert_eq!(s.payload_bits(), 300 * 5);
        assert_eq!(s.bits_per_coded_sample(), 2.5);
    }
}
