//! Codebook design from closed-loop residuals and rate/quality sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{self, EntropyCounter};
use crate::audio::Signal;
use crate::codec::{self, CodecConfig, CodecError, EncodedStream, Mode};
use crate::vq::{self, Codebook, DesignReport, VqError};

/// Scalar bits used by the residual-harvesting run.
pub const HARVEST_BITS: u32 = 3;

pub const CSV_HEADER: &str = "mode,N,Nq,bits_per_sample,segsnr_mean,segsnr_std,h0,h1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("insufficient training data: {available} residual vectors, need at least {needed}")]
    InsufficientData { needed: usize, available: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Vq(#[from] VqError),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignMethod {
    Lbg { epsilon: f64, stop_tol: f64 },
    RandomLloyd { stop_tol: f64 },
}

impl Default for DesignMethod {
    fn default() -> Self {
        DesignMethod::Lbg {
            epsilon: vq::DEFAULT_EPSILON,
            stop_tol: vq::DEFAULT_STOP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignedCodebook {
    pub codebook: Codebook,
    pub report: DesignReport,
}

/// Residual vectors of a mode-S2 run at [`HARVEST_BITS`] bits.
pub fn harvest_residuals(
    training: &Signal,
    dim: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let config = CodecConfig::new(Mode::S2, dim, HARVEST_BITS)?.with_seed(seed);
    Ok(codec::generate_residuals(training, &config)?)
}

/// Harvests residuals from `training` and designs one codebook per entry of
/// `nq_range`.
pub fn design_codebooks(
    training: &Signal,
    dim: usize,
    nq_range: &[u32],
    method: DesignMethod,
    seed: u64,
) -> Result<Vec<DesignedCodebook>, PipelineError> {
    if nq_range.is_empty() {
        return Ok(Vec::new());
    }
    let residuals = harvest_residuals(training, dim, seed)?;
    design_from_residuals(&residuals, nq_range, method, seed)
}

pub fn design_from_residuals(
    residuals: &[Vec<f64>],
    nq_range: &[u32],
    method: DesignMethod,
    seed: u64,
) -> Result<Vec<DesignedCodebook>, PipelineError> {
    let Some(&largest) = nq_range.iter().max() else {
        return Ok(Vec::new());
    };
    if largest > vq::MAX_BITS {
        return Err(VqError::InvalidBits(largest).into());
    }
    let needed = 1usize << largest;
    if residuals.len() < needed {
        return Err(PipelineError::InsufficientData {
            needed,
            available: residuals.len(),
        });
    }
    nq_range
        .iter()
        .map(|&bits| {
            let (codebook, report) = match method {
                DesignMethod::Lbg { epsilon, stop_tol } => {
                    vq::lbg_design(residuals, bits, epsilon, stop_tol)?
                }
                DesignMethod::RandomLloyd { stop_tol } => vq::random_init_design(
                    residuals,
                    bits,
                    codec::frame_seed(seed, bits as u64),
                    stop_tol,
                )?,
            };
            Ok(DesignedCodebook { codebook, report })
        })
        .collect()
}

/// Codebooks keyed by `(N, Nq)`.
pub type CodebookSet = BTreeMap<(usize, u32), Codebook>;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: Mode,
    pub dim: usize,
    pub bits: u32,
    pub bits_per_sample: f64,
    pub segsnr_mean: f64,
    pub segsnr_std: f64,
    pub h0: f64,
    pub h1: f64,
    /// Set when the configuration could not be evaluated; the metrics are NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Encodes and decodes every signal under every config.
///
/// SEGSNR segments (of the config's frame length) and index statistics are
/// pooled over all signals. Rows are sorted by bits per sample, keeping the
/// config order for ties.
pub fn run_sweep(signals: &[Signal], configs: &[CodecConfig], codebooks: &CodebookSet) -> SweepResult {
    run_sweep_with(signals, configs, codebooks, |_| {})
}

/// [`run_sweep`] with a callback after each evaluated config.
pub fn run_sweep_with(
    signals: &[Signal],
    configs: &[CodecConfig],
    codebooks: &CodebookSet,
    mut on_row: impl FnMut(&SweepRow),
) -> SweepResult {
    let mut rows: Vec<SweepRow> = configs
        .iter()
        .map(|config| {
            let row = evaluate(signals, config, codebooks);
            on_row(&row);
            row
        })
        .collect();
    rows.sort_by(|a, b| a.bits_per_sample.total_cmp(&b.bits_per_sample));
    SweepResult { rows }
}

fn evaluate(signals: &[Signal], config: &CodecConfig, codebooks: &CodebookSet) -> SweepRow {
    let mut row = SweepRow {
        mode: config.mode,
        dim: config.dim,
        bits: config.bits,
        bits_per_sample: config.bits_per_sample(),
        segsnr_mean: f64::NAN,
        segsnr_std: f64::NAN,
        h0: f64::NAN,
        h1: f64::NAN,
        error: None,
    };
    match measure(signals, config, codebooks) {
        Ok((mean, std, h0, h1)) => {
            row.segsnr_mean = mean;
            row.segsnr_std = std;
            row.h0 = h0;
            row.h1 = h1;
        }
        Err(e) => row.error = Some(e),
    }
    row
}

fn measure(
    signals: &[Signal],
    config: &CodecConfig,
    codebooks: &CodebookSet,
) -> Result<(f64, f64, f64, f64), String> {
    if signals.is_empty() {
        return Err("no evaluation signals".into());
    }
    let codebook = match config.mode {
        Mode::S3 => Some(
            codebooks
                .get(&(config.dim, config.bits))
                .ok_or_else(|| format!("no codebook for N={} Nq={}", config.dim, config.bits))?,
        ),
        _ => None,
    };
    let mut segments = Vec::new();
    let mut counter = EntropyCounter::new(config.bits).map_err(|e| e.to_string())?;
    for signal in signals {
        let encoded = codec::encode(signal, config, codebook).map_err(|e| e.to_string())?;
        let stream =
            EncodedStream::from_bytes(&encoded.stream.to_bytes()).map_err(|e| e.to_string())?;
        let (decoded, indices) =
            codec::decode_with_indices(&stream, None).map_err(|e| e.to_string())?;
        segments.extend(
            analysis::segment_snrs(signal.samples(), decoded.samples(), config.frame_length)
                .map_err(|e| e.to_string())?,
        );
        counter.add_sequence(&indices).map_err(|e| e.to_string())?;
    }
    let snr = analysis::summarize_segments(segments, config.frame_length).map_err(|e| e.to_string())?;
    let entropy = counter.report();
    Ok((snr.mean_db, snr.std_db, entropy.h0, entropy.h1))
}

impl SweepResult {
    /// CSV with [`CSV_HEADER`]. Failed rows carry NaN metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.mode, r.dim, r.bits, r.bits_per_sample, r.segsnr_mean, r.segsnr_std, r.h0, r.h1
            );
        }
        out
    }

    /// Parses [`SweepResult::to_csv`] output. Error messages are not stored in
    /// the CSV, so parsed rows have `error: None`.
    pub fn from_csv(text: &str) -> Result<Self, PipelineError> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: String| PipelineError::Csv {
            line: line + 1,
            message,
        };
        match lines.next() {
            Some((_, h)) if h.trim_end() == CSV_HEADER => {}
            Some((i, h)) => return Err(bad(i, format!("unexpected header {h:?}"))),
            None => return Err(bad(0, "empty input".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(bad(i, format!("expected 8 fields, got {}", fields.len())));
            }
            let float = |k: usize| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| bad(i, format!("field {k}: {e}")))
            };
            rows.push(SweepRow {
                mode: fields[0].parse().map_err(|e| bad(i, format!("mode: {e}")))?,
                dim: fields[1].parse().map_err(|e| bad(i, format!("N: {e}")))?,
                bits: fields[2].parse().map_err(|e| bad(i, format!("Nq: {e}")))?,
                bits_per_sample: float(3)?,
                segsnr_mean: float(4)?,
                segsnr_std: float(5)?,
                h0: float(6)?,
                h1: float(7)?,
                error: None,
            });
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chirp(len: usize) -> Signal {
        let x = (0..len)
            .map(|i| {
                let t = i as f64;
                0.3 * (t * (0.02 + t * 2e-6)).sin() + 0.1 * (t * 0.37).sin()
            })
            .collect();
        Signal::new(x, 8000).unwrap()
    }

    fn quick(mode: Mode, dim: usize, bits: u32) -> CodecConfig {
        let mut c = CodecConfig::new(mode, dim, bits).unwrap();
        c.frame_length = 40 * dim;
        c.train.restarts = 1;
        c.train.max_iterations = 5;
        c
    }

    #[test]
    fn empty_range_designs_nothing() {
        let out = design_codebooks(&chirp(100), 2, &[], DesignMethod::default(), 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn insufficient_residuals() {
        let residuals = vec![vec![0.1, 0.2]; 20];
        let err = design_from_residuals(&residuals, &[5], DesignMethod::default(), 0).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::InsufficientData {
                needed: 32,
                available: 20
            }
        ));
    }

    #[test]
    fn one_codebook_per_size() {
        let residuals: Vec<Vec<f64>> = (0..300)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        for method in [DesignMethod::default(), DesignMethod::RandomLloyd { stop_tol: 1e-4 }] {
            let out = design_from_residuals(&residuals, &[2, 4, 5], method, 3).unwrap();
            let sizes: Vec<usize> = out.iter().map(|d| d.codebook.len()).collect();
            assert_eq!(sizes, vec![4, 16, 32]);
        }
    }

    #[test]
    fn sweep_rows_sorted_and_failed_rows_kept() {
        let configs = vec![
            quick(Mode::S1, 1, 3),
            quick(Mode::S3, 2, 5),
            quick(Mode::S1, 1, 2),
        ];
        let result = run_sweep(&[chirp(400)], &configs, &CodebookSet::new());
        let bps: Vec<f64> = result.rows.iter().map(|r| r.bits_per_sample).collect();
        assert_eq!(bps, vec![2.0, 2.5, 3.0]);
        assert!(result.rows[1].error.as_deref().unwrap().contains("no codebook"));
        assert!(result.rows[1].segsnr_mean.is_nan());
        assert!(result.rows[0].error.is_none() && result.rows[0].segsnr_mean.is_finite());
    }

    #[test]
    fn csv_round_trip() {
        let result = SweepResult {
            rows: vec![
                SweepRow {
                    mode: Mode::S3,
                    dim: 6,
                    bits: 6,
                    bits_per_sample: 1.0,
                    segsnr_mean: 7.123456789012345,
                    segsnr_std: 0.1 + 0.2,
                    h0: 5.9,
                    h1: 5.2,
                    error: None,
                },
                SweepRow {
                    mode: Mode::S1,
                    dim: 1,
                    bits: 2,
                    bits_per_sample: 2.0,
                    segsnr_mean: -3.5e-7,
                    segsnr_std: 4.0,
                    h0: 1.0,
                    h1: 0.0,
                    error: None,
                },
            ],
        };
        let csv = result.to_csv();
        assert!(csv.starts_with("mode,N,Nq,bits_per_sample,segsnr_mean,segsnr_std,h0,h1\n"));
        assert_eq!(SweepResult::from_csv(&csv).unwrap(), result);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(SweepResult::from_csv("a,b\n").is_err());
        let err = SweepResult::from_csv(&format!("{CSV_HEADER}\ns1,1,3\n")).unwrap_err();
        assert!(matches!(err, PipelineError::Csv { line: 2, .. }));
    }
}
