//! Command-line front end.
//!
//! Exit codes: 0 success, 1 bad arguments, 2 I/O failure, 3 domain error,
//! 4 corrupt input.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{self, AnalysisError};
use crate::audio::{self, AudioError, Signal};
use crate::codec::{self, CodecConfig, CodecError, EncodedStream, Mode};
use crate::mlp::Regularization;
use crate::pipeline::{self, CodebookSet, DesignMethod, PipelineError};
use crate::vq::{self, Codebook, VqError};

pub const DEFAULT_SEED: u64 = 0x4e4c_5056_5121;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_CORRUPT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "nlpvq", version, about = "Nonlinear predictive vector quantization speech coder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a mono 16-bit WAV file into an NLPQ stream.
    Encode(EncodeArgs),
    /// Decode an NLPQ stream into a WAV file.
    Decode(DecodeArgs),
    /// Design codebooks from the residuals of a training file.
    TrainCodebook(TrainArgs),
    /// SEGSNR and index entropy of a decoded file.
    Analyze(AnalyzeArgs),
    /// Evaluate a grid of codec configurations and write a CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    mode: Mode,
    /// Vector dimension N.
    #[arg(long = "n")]
    dim: usize,
    /// Quantizer bits Nq.
    #[arg(long = "nq")]
    bits: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// NLVQ codebook, required for mode s3.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// key=value file overriding predictor, training and quantizer defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the encoder's reconstruction as raw little-endian f64.
    #[arg(long)]
    debug_recon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Write the decoded samples as raw little-endian f64.
    #[arg(long)]
    raw_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Lbg,
    Lloyd,
}

impl MethodArg {
    fn method(self) -> DesignMethod {
        match self {
            MethodArg::Lbg => DesignMethod::default(),
            MethodArg::Lloyd => DesignMethod::RandomLloyd {
                stop_tol: vq::DEFAULT_STOP_TOL,
            },
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "n")]
    dim: usize,
    /// Inclusive range of codebook sizes in bits, `a:b` or a single value.
    #[arg(long)]
    nq_range: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Lbg)]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    decoded: PathBuf,
    /// NLPQ stream whose indices are used for the entropy report.
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Defaults to the stream's frame length, or 200 without a stream.
    #[arg(long)]
    segment_length: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Codebook training material (repeatable).
    #[arg(long, required = true, num_args = 1..)]
    train: Vec<PathBuf>,
    /// Evaluation material (repeatable), disjoint from the training files.
    #[arg(long, required = true, num_args = 1..)]
    eval: Vec<PathBuf>,
    /// Grid such as `s3:n=2..6,nq=5..9` (repeatable).
    #[arg(long, required = true)]
    grid: Vec<String>,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Lbg)]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

fn audio_code(e: &AudioError) -> i32 {
    match e {
        AudioError::NotFound(_) | AudioError::Io(_) | AudioError::Wav(_) => EXIT_IO,
        _ => EXIT_DOMAIN,
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        let code = match &e {
            e if e.is_corruption() => EXIT_CORRUPT,
            CodecError::InvalidConfig(_) => EXIT_USAGE,
            CodecError::Audio(a) => audio_code(a),
            _ => EXIT_DOMAIN,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        Self::domain(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Codec(c) => c.into(),
            other => Self::domain(other.to_string()),
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::TrainCodebook(a) => cmd_train_codebook(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.code == EXIT_USAGE {
                eprintln!("run with --help for usage");
            }
            e.code
        }
    }
}

fn read_signal(path: &Path) -> Result<Signal, CliError> {
    audio::read_pcm(path).map_err(|e| CliError {
        code: audio_code(&e),
        message: format!("{}: {e}", path.display()),
    })
}

fn write_signal(signal: &Signal, path: &Path) -> Result<(), CliError> {
    audio::write_pcm(signal, path).map_err(|e| CliError {
        code: audio_code(&e),
        message: format!("{}: {e}", path.display()),
    })
}

fn read_codebook(path: &Path) -> Result<Codebook, CliError> {
    Codebook::read_file(path).map_err(|e| CliError {
        code: match e {
            VqError::Io(_) => EXIT_IO,
            VqError::Malformed(_) => EXIT_CORRUPT,
            _ => EXIT_DOMAIN,
        },
        message: format!("{}: {e}", path.display()),
    })
}

fn read_stream(path: &Path) -> Result<EncodedStream, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    EncodedStream::from_bytes(&bytes).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn write_raw_f64(samples: &[f64], path: &Path) -> Result<(), CliError> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_text(text: &str, path: &Path) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Applies `key=value` lines to `config`. Blank lines and `#` comments are
/// ignored. Keys: inputs, hidden, frame_length, restarts, max_iterations,
/// lambda_init, lambda_up, lambda_down, cost_tolerance, regularization
/// (`bayesian` or `fixed`), alpha, beta, initial_step, step_min, step_max,
/// multipliers (comma-separated).
pub fn apply_config_text(config: &mut CodecConfig, text: &str) -> Result<(), String> {
    let (mut alpha, mut beta) = config.train.regularization.initial();
    let mut bayesian = matches!(config.train.regularization, Regularization::Bayesian { .. });
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| format!("line {}: {key}: {e}", n + 1);
        let int = || value.parse::<usize>().map_err(|e| bad(&e));
        let float = || value.parse::<f64>().map_err(|e| bad(&e));
        match key {
            "inputs" => config.inputs = int()?,
            "hidden" => config.hidden = int()?,
            "frame_length" => config.frame_length = int()?,
            "restarts" => config.train.restarts = int()?,
            "max_iterations" => config.train.max_iterations = int()?,
            "lambda_init" => config.train.lambda_init = float()?,
            "lambda_up" => config.train.lambda_up = float()?,
            "lambda_down" => config.train.lambda_down = float()?,
            "cost_tolerance" => config.train.cost_tolerance = float()?,
            "alpha" => alpha = float()?,
            "beta" => beta = float()?,
            "regularization" => {
                bayesian = match value {
                    "bayesian" => true,
                    "fixed" => false,
                    other => return Err(bad(&format!("unknown value {other:?}"))),
                }
            }
            "initial_step" => config.initial_step = float()?,
            "step_min" => config.step_min = float()?,
            "step_max" => config.step_max = float()?,
            "multipliers" => {
                config.multipliers = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| bad(&e)))
                    .collect::<Result<_, _>>()?
            }
            other => return Err(format!("line {}: unknown key {other:?}", n + 1)),
        }
    }
    config.train.regularization = if bayesian {
        Regularization::Bayesian {
            alpha_init: alpha,
            beta_init: beta,
        }
    } else {
        Regularization::Fixed { alpha, beta }
    };
    Ok(())
}

fn load_config_file(config: &mut CodecConfig, path: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = path {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        apply_config_text(config, &text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<(), CliError> {
    if a.mode == Mode::S3 && a.codebook.is_none() {
        return Err(CliError::usage("mode s3 requires --codebook"));
    }
    let mut config = CodecConfig::new(a.mode, a.dim, a.bits)?.with_seed(a.seed);
    load_config_file(&mut config, a.config.as_deref())?;
    config.validate()?;
    let codebook = a.codebook.as_deref().map(read_codebook).transpose()?;
    let signal = read_signal(&a.input)?;
    let encoded = codec::encode(&signal, &config, codebook.as_ref())?;
    let bytes = encoded.stream.to_bytes();
    fs::write(&a.output, &bytes).map_err(|e| CliError::io(&a.output, e))?;
    if let Some(path) = &a.debug_recon {
        write_raw_f64(&encoded.reconstruction, path)?;
    }
    println!("bits/sample: {}", encoded.stream.bits_per_coded_sample());
    println!(
        "size: {} bytes ({} payload bytes, {} samples)",
        bytes.len(),
        encoded.stream.payload.len(),
        signal.len()
    );
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> Result<(), CliError> {
    let stream = read_stream(&a.input)?;
    let codebook = a.codebook.as_deref().map(read_codebook).transpose()?;
    let decoded = codec::decode(&stream, codebook.as_ref())?;
    write_signal(&decoded, &a.output)?;
    if let Some(path) = &a.raw_output {
        write_raw_f64(decoded.samples(), path)?;
    }
    println!("samples: {}", decoded.len());
    Ok(())
}

/// Parses `a:b` (inclusive) or a single value. An empty range is an error.
pub fn parse_nq_range(text: &str) -> Result<Vec<u32>, String> {
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|e| format!("bad bit count {s:?}: {e}"))
    };
    let (lo, hi) = match text.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let v = parse(text)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty range {text:?}"));
    }
    Ok((lo..=hi).collect())
}

fn method_name(m: DesignMethod) -> &'static str {
    match m {
        DesignMethod::Lbg { .. } => "lbg",
        DesignMethod::RandomLloyd { .. } => "lloyd",
    }
}

fn cmd_train_codebook(a: TrainArgs) -> Result<(), CliError> {
    let range = parse_nq_range(&a.nq_range).map_err(CliError::usage)?;
    if !(1..=codec::MAX_DIM).contains(&a.dim) {
        return Err(CliError::usage(format!(
            "--n must be in [1, {}], got {}",
            codec::MAX_DIM,
            a.dim
        )));
    }
    if let Some(&b) = range.iter().find(|&&b| b == 0 || b > vq::MAX_BITS) {
        return Err(CliError::usage(format!(
            "--nq-range values must be in [1, {}], got {b}",
            vq::MAX_BITS
        )));
    }
    let signal = read_signal(&a.input)?;
    let method = a.method.method();
    let designed = pipeline::design_codebooks(&signal, a.dim, &range, method, a.seed)?;
    fs::create_dir_all(&a.output_dir).map_err(|e| CliError::io(&a.output_dir, e))?;
    let mut report = format!(
        "method: {}\nN: {}\nseed: {}\ntraining: {}\n",
        method_name(method),
        a.dim,
        a.seed,
        a.input.display()
    );
    for d in &designed {
        let bits = d.codebook.bits();
        let path = a.output_dir.join(codebook_file_name(a.dim, bits));
        d.codebook.write_file(&path).map_err(|e| CliError::io(&path, e))?;
        let r = &d.report;
        let _ = write!(
            report,
            "\n[Nq={bits}]\nfile: {}\niterations: {}\nfinal_distortion: {}\nempty_cell_events: {}\nlevel_starts: {:?}\ndistortion_trace:",
            path.file_name().unwrap_or_default().to_string_lossy(),
            r.iterations,
            r.final_distortion(),
            r.empty_cell_events,
            r.level_starts,
        );
        for v in &r.distortion_trace {
            let _ = write!(report, " {v}");
        }
        report.push('\n');
        println!(
            "Nq={bits}: {} codewords, final distortion {}",
            d.codebook.len(),
            r.final_distortion()
        );
    }
    let report_path = a.output_dir.join(format!("design_report_n{}.txt", a.dim));
    write_text(&report, &report_path)
}

pub fn codebook_file_name(dim: usize, bits: u32) -> String {
    format!("codebook_n{dim}_nq{bits}.nlvq")
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let original = read_signal(&a.original)?;
    let decoded = read_signal(&a.decoded)?;
    let stream = a.indices.as_deref().map(read_stream).transpose()?;
    let segment_length = a
        .segment_length
        .or_else(|| stream.as_ref().map(|s| s.header.config.frame_length))
        .unwrap_or(codec::BASE_FRAME_LENGTH);
    if segment_length == 0 {
        return Err(CliError::usage("--segment-length must be at least 1"));
    }
    let snr = analysis::segsnr(original.samples(), decoded.samples(), segment_length)?;
    println!("{snr}");
    let mut csv = snr.to_csv();
    if let Some(stream) = &stream {
        let expected = stream.expected_payload_len();
        if stream.payload.len() != expected {
            return Err(CliError {
                code: EXIT_CORRUPT,
                message: format!(
                    "stream payload has {} bytes, header implies {expected}",
                    stream.payload.len()
                ),
            });
        }
        let config = &stream.header.config;
        let count = config.index_count(stream.header.sample_count as usize);
        let indices = crate::bits::unpack(&stream.payload, config.bits, count).ok_or(CliError {
            code: EXIT_CORRUPT,
            message: "payload ended early".into(),
        })?;
        let entropy = analysis::entropy_report(&indices, config.bits)?;
        println!("{entropy}");
        csv.extend(entropy.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    if let Some(path) = &a.csv {
        write_text(&csv, path)?;
    }
    Ok(())
}

/// One `(mode, N, Nq)` triple per grid point of specs like
/// `s3:n=2..6,nq=5..9` (ranges inclusive, single values allowed).
pub fn parse_grid(spec: &str) -> Result<Vec<(Mode, usize, u32)>, String> {
    let (mode, rest) = spec
        .split_once(':')
        .ok_or_else(|| format!("grid {spec:?}: expected <mode>:n=<range>,nq=<range>"))?;
    let mode: Mode = mode.trim().parse()?;
    let range = |s: &str| -> Result<(u32, u32), String> {
        let num = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|e| format!("grid {spec:?}: bad number {t:?}: {e}"))
        };
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b)?),
            None => (num(s)?, num(s)?),
        };
        if lo > hi {
            return Err(format!("grid {spec:?}: empty range {s:?}"));
        }
        Ok((lo, hi))
    };
    let (mut dims, mut bits) = (None, None);
    for part in rest.split(',') {
        match part.split_once('=') {
            Some((k, v)) if k.trim() == "n" => dims = Some(range(v)?),
            Some((k, v)) if k.trim() == "nq" => bits = Some(range(v)?),
            _ => return Err(format!("grid {spec:?}: unexpected {part:?}")),
        }
    }
    let (Some((n0, n1)), Some((q0, q1))) = (dims, bits) else {
        return Err(format!("grid {spec:?}: both n and nq are required"));
    };
    let mut out = Vec::new();
    for n in n0..=n1 {
        for q in q0..=q1 {
            out.push((mode, n as usize, q));
        }
    }
    Ok(out)
}

fn concatenate(paths: &[PathBuf]) -> Result<Signal, CliError> {
    let mut samples = Vec::new();
    let mut rate = None;
    for p in paths {
        let s = read_signal(p)?;
        match rate {
            None => rate = Some(s.sample_rate()),
            Some(r) if r != s.sample_rate() => {
                return Err(CliError::domain(format!(
                    "{}: sample rate {} differs from {r}",
                    p.display(),
                    s.sample_rate()
                )))
            }
            _ => {}
        }
        samples.extend_from_slice(s.samples());
    }
    Signal::new(samples, rate.unwrap_or(8000)).map_err(|e| CliError::domain(e.to_string()))
}

fn canonical(path: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let train: BTreeSet<PathBuf> = a.train.iter().map(|p| canonical(p)).collect::<Result<_, _>>()?;
    for p in &a.eval {
        if train.contains(&canonical(p)?) {
            return Err(CliError::usage(format!(
                "{} is listed in both --train and --eval",
                p.display()
            )));
        }
    }
    let mut points = Vec::new();
    for g in &a.grid {
        points.extend(parse_grid(g).map_err(CliError::usage)?);
    }
    let mut configs = Vec::with_capacity(points.len());
    for &(mode, dim, bits) in &points {
        let mut c = CodecConfig::new(mode, dim, bits)?.with_seed(a.seed);
        load_config_file(&mut c, a.config.as_deref())?;
        configs.push(c);
    }

    let mut wanted: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for c in configs.iter().filter(|c| c.mode == Mode::S3) {
        wanted.entry(c.dim).or_default().insert(c.bits);
    }
    let mut codebooks = CodebookSet::new();
    if !wanted.is_empty() {
        let training = concatenate(&a.train)?;
        for (dim, bits) in &wanted {
            let range: Vec<u32> = bits.iter().copied().collect();
            eprintln!("designing N={dim} codebooks for Nq {range:?}");
            let designed =
                pipeline::design_codebooks(&training, *dim, &range, a.method.method(), a.seed)?;
            for d in designed {
                codebooks.insert((*dim, d.codebook.bits()), d.codebook);
            }
        }
    }

    let eval: Vec<Signal> = a.eval.iter().map(|p| read_signal(p)).collect::<Result<_, _>>()?;
    let total = configs.len();
    let mut done = 0;
    let result = pipeline::run_sweep_with(&eval, &configs, &codebooks, |row| {
        done += 1;
        match &row.error {
            None => eprintln!(
                "[{done}/{total}] {} N={} Nq={}: {:.3} dB",
                row.mode, row.dim, row.bits, row.segsnr_mean
            ),
            Some(e) => eprintln!("[{done}/{total}] {} N={} Nq={}: failed: {e}", row.mode, row.dim, row.bits),
        }
    });
    write_text(&result.to_csv(), &a.csv)?;
    println!("{:>4} {:>3} {:>3} {:>8} {:>10} {:>9} {:>8} {:>8}", "mode", "N", "Nq", "bits/smp", "segsnr_dB", "std_dB", "h0", "h1");
    for r in &result.rows {
        println!(
            "{:>4} {:>3} {:>3} {:>8.4} {:>10.3} {:>9.3} {:>8.4} {:>8.4}",
            r.mode.to_string(),
            r.dim,
            r.bits,
            r.bits_per_sample,
            r.segsnr_mean,
            r.segsnr_std,
            r.h0,
            r.h1
        );
    }
    Ok(())
}
