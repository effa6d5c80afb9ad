//! Segmental SNR and codeword entropy diagnostics.

use std::fmt;

use thiserror::Error;

pub const SEGSNR_FLOOR_DB: f64 = -10.0;
pub const SEGSNR_CEIL_DB: f64 = 80.0;
/// Above this many bits the first-order estimate needs more data than a
/// sentence provides.
pub const RELIABLE_ENTROPY_BITS: u32 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: original {original}, decoded {decoded}")]
    LengthMismatch { original: usize, decoded: usize },
    #[error("segment length must be at least 1")]
    SegmentLength,
    #[error("no segment carries signal energy")]
    NoValidSegments,
    #[error("index {index} out of range for {bits}-bit codewords")]
    IndexOutOfRange { index: u32, bits: u32 },
    #[error("need at least {needed} symbols, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("alphabet of {0} bits is too large")]
    AlphabetTooLarge(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegsnrReport {
    pub mean_db: f64,
    pub std_db: f64,
    pub per_segment_db: Vec<f64>,
    pub segment_length: usize,
}

/// Per-segment SNR values in dB; silent segments are skipped.
pub fn segment_snrs(
    original: &[f64],
    decoded: &[f64],
    segment_length: usize,
) -> Result<Vec<f64>, AnalysisError> {
    if original.len() != decoded.len() {
        return Err(AnalysisError::LengthMismatch {
            original: original.len(),
            decoded: decoded.len(),
        });
    }
    if segment_length == 0 {
        return Err(AnalysisError::SegmentLength);
    }
    Ok(original
        .chunks(segment_length)
        .zip(decoded.chunks(segment_length))
        .filter_map(|(x, y)| {
            let signal: f64 = x.iter().map(|v| v * v).sum();
            if signal == 0.0 {
                return None;
            }
            let noise: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let db = if noise == 0.0 {
                SEGSNR_CEIL_DB
            } else {
                10.0 * (signal / noise).log10()
            };
            Some(db.clamp(SEGSNR_FLOOR_DB, SEGSNR_CEIL_DB))
        })
        .collect())
}

/// Mean and population standard deviation over a set of segment SNRs.
pub fn summarize_segments(
    per_segment_db: Vec<f64>,
    segment_length: usize,
) -> Result<SegsnrReport, AnalysisError> {
    if per_segment_db.is_empty() {
        return Err(AnalysisError::NoValidSegments);
    }
    let n = per_segment_db.len() as f64;
    let mean = per_segment_db.iter().sum::<f64>() / n;
    let var = per_segment_db.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(SegsnrReport {
        mean_db: mean,
        std_db: var.sqrt(),
        per_segment_db,
        segment_length,
    })
}

/// SEGSNR with per-segment values clamped to `[-10, 80]` dB. A trailing
/// partial segment counts as a segment.
pub fn segsnr(
    original: &[f64],
    decoded: &[f64],
    segment_length: usize,
) -> Result<SegsnrReport, AnalysisError> {
    summarize_segments(segment_snrs(original, decoded, segment_length)?, segment_length)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub h0: f64,
    pub h1: f64,
    pub symbol_count: usize,
    pub alphabet_bits: u32,
    /// Set when the alphabet is too large for the counts to be trusted.
    pub underestimation_flag: bool,
}

/// Symbol and transition counts pooled over one or more index sequences.
///
/// Transitions are counted cyclically within each sequence (the last symbol
/// precedes the first), so the conditioning marginal equals the symbol
/// marginal and `h1 <= h0` holds for every input.
#[derive(Debug, Clone)]
pub struct EntropyCounter {
    bits: u32,
    symbols: Vec<u64>,
    transitions: Vec<u64>,
    total: u64,
}

impl EntropyCounter {
    pub fn new(bits: u32) -> Result<Self, AnalysisError> {
        if bits > 12 {
            return Err(AnalysisError::AlphabetTooLarge(bits));
        }
        let m = 1usize << bits;
        Ok(Self {
            bits,
            symbols: vec![0; m],
            transitions: vec![0; m * m],
            total: 0,
        })
    }

    pub fn add_sequence(&mut self, indices: &[u32]) -> Result<(), AnalysisError> {
        let m = 1u32 << self.bits;
        if let Some(&index) = indices.iter().find(|&&i| i >= m) {
            return Err(AnalysisError::IndexOutOfRange {
                index,
                bits: self.bits,
            });
        }
        let Some(&last) = indices.last() else {
            return Ok(());
        };
        let mut prev = last;
        for &i in indices {
            self.symbols[i as usize] += 1;
            self.transitions[prev as usize * m as usize + i as usize] += 1;
            prev = i;
        }
        self.total += indices.len() as u64;
        Ok(())
    }

    pub fn symbol_count(&self) -> usize {
        self.total as usize
    }

    /// `sum_i P_i log2(1/P_i)`
    pub fn h0(&self) -> f64 {
        let n = self.total as f64;
        self.symbols
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let c = c as f64;
                c / n * (n / c).log2()
            })
            .sum()
    }

    /// `sum_j P_j sum_i P(i|j) log2(1/P(i|j))`
    pub fn h1(&self) -> f64 {
        let m = 1usize << self.bits;
        let n = self.total as f64;
        let mut h = 0.0;
        for j in 0..m {
            let row = &self.transitions[j * m..(j + 1) * m];
            let cj: u64 = row.iter().sum();
            if cj == 0 {
                continue;
            }
            let cj = cj as f64;
            for &c in row.iter().filter(|&&c| c > 0) {
                let c = c as f64;
                h += c / n * (cj / c).log2();
            }
        }
        h
    }

    pub fn report(&self) -> EntropyReport {
        EntropyReport {
            h0: self.h0(),
            h1: self.h1(),
            symbol_count: self.symbol_count(),
            alphabet_bits: self.bits,
            underestimation_flag: self.bits > RELIABLE_ENTROPY_BITS,
        }
    }
}

/// Zero-order (marginal) entropy of a codeword sequence, in bits.
pub fn entropy0(indices: &[u32], bits: u32) -> Result<f64, AnalysisError> {
    if indices.is_empty() {
        return Err(AnalysisError::TooShort { needed: 1, got: 0 });
    }
    let mut c = EntropyCounter::new(bits)?;
    c.add_sequence(indices)?;
    Ok(c.h0())
}

/// First-order (conditional on the previous codeword) entropy, in bits.
pub fn entropy1(indices: &[u32], bits: u32) -> Result<f64, AnalysisError> {
    if indices.len() < 2 {
        return Err(AnalysisError::TooShort {
            needed: 2,
            got: indices.len(),
        });
    }
    let mut c = EntropyCounter::new(bits)?;
    c.add_sequence(indices)?;
    Ok(c.h1())
}

pub fn entropy_report(indices: &[u32], bits: u32) -> Result<EntropyReport, AnalysisError> {
    if indices.len() < 2 {
        return Err(AnalysisError::TooShort {
            needed: 2,
            got: indices.len(),
        });
    }
    let mut c = EntropyCounter::new(bits)?;
    c.add_sequence(indices)?;
    Ok(c.report())
}

impl SegsnrReport {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nsegsnr_mean_db,{}\nsegsnr_std_db,{}\nsegments,{}\nsegment_length,{}\n",
            self.mean_db,
            self.std_db,
            self.per_segment_db.len(),
            self.segment_length
        )
    }
}

impl fmt::Display for SegsnrReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "segsnr_mean_db: {:.4}", self.mean_db)?;
        writeln!(f, "segsnr_std_db: {:.4}", self.std_db)?;
        writeln!(f, "segments: {}", self.per_segment_db.len())?;
        write!(f, "segment_length: {}", self.segment_length)
    }
}

impl EntropyReport {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nh0,{}\nh1,{}\nsymbol_count,{}\nalphabet_bits,{}\nunderestimated,{}\n",
            self.h0, self.h1, self.symbol_count, self.alphabet_bits, self.underestimation_flag
        )
    }
}

impl fmt::Display for EntropyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h0_bits: {:.4}", self.h0)?;
        writeln!(f, "h1_bits: {:.4}", self.h1)?;
        writeln!(f, "symbol_count: {}", self.symbol_count)?;
        write!(f, "alphabet_bits: {}", self.alphabet_bits)?;
        if self.underestimation_flag {
            write!(f, "\nnote: entropies are underestimated above {RELIABLE_ENTROPY_BITS} bits")?;
        }
        Ok(())
    }
}
