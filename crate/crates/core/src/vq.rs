//! Fixed-rate vector quantization and codebook design.
//!
//! Codebooks are designed either from randomly chosen training vectors followed
//! by generalized Lloyd iterations, or by LBG splitting from the global
//! centroid. Distortion is the mean squared Euclidean distance per vector.

use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const FILE_MAGIC: &[u8; 4] = b"NLVQ";
const FILE_VERSION: u8 = 1;
/// Largest supported codebook size in bits.
pub const MAX_BITS: u32 = 16;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_STOP_TOL: f64 = 1e-4;
pub const MAX_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum VqError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("codebook needs {expected} vectors of dimension {dim}, got {actual} values")]
    WrongSize {
        expected: usize,
        dim: usize,
        actual: usize,
    },
    #[error("codebook bits must be in [1, {MAX_BITS}], got {0}")]
    InvalidBits(u32),
    #[error("codebook dimension must be in [1, 255], got {0}")]
    InvalidDimension(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training set has {available} vectors, codebook needs at least {needed}")]
    InsufficientTraining { needed: usize, available: usize },
    #[error("empty training set")]
    EmptyTraining,
    #[error("malformed codebook file: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `2^bits` reconstruction vectors of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    bits: u32,
    vectors: Vec<f64>,
}

impl Codebook {
    /// `bits` may be 0 here (a single codeword); the design routines require at least 1.
    pub fn new(dim: usize, bits: u32, vectors: Vec<f64>) -> Result<Self, VqError> {
        if dim == 0 || dim > u8::MAX as usize {
            return Err(VqError::InvalidDimension(dim));
        }
        if bits > MAX_BITS {
            return Err(VqError::InvalidBits(bits));
        }
        let expected = 1usize << bits;
        if vectors.len() != expected * dim {
            return Err(VqError::WrongSize {
                expected,
                dim,
                actual: vectors.len(),
            });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(VqError::NonFinite("codebook"));
        }
        Ok(Self { dim, bits, vectors })
    }

    pub fn from_rows(bits: u32, rows: &[Vec<f64>]) -> Result<Self, VqError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(VqError::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        Self::new(dim, bits, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        1 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.dim)
    }

    /// Index minimizing squared distance to `v`; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> Result<(usize, &[f64]), VqError> {
        if v.len() != self.dim {
            return Err(VqError::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let (i, _) = self.nearest_unchecked(v);
        Ok((i, self.vector(i)))
    }

    pub(crate) fn nearest_unchecked(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.iter().enumerate() {
            let d = squared_distance(v, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Every component rounded to the nearest `f32`, the precision of the file format.
    pub fn rounded_to_f32(&self) -> Self {
        Self {
            dim: self.dim,
            bits: self.bits,
            vectors: self.vectors.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + self.vectors.len() * 4);
        out.extend_from_slice(FILE_MAGIC);
        out.push(FILE_VERSION);
        out.push(self.dim as u8);
        out.push(self.bits as u8);
        for &v in &self.vectors {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Parses a codebook at the start of `bytes`, returning it and the byte count consumed.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize), VqError> {
        if bytes.len() < 7 || &bytes[..4] != FILE_MAGIC {
            return Err(VqError::Malformed("bad magic"));
        }
        if bytes[4] != FILE_VERSION {
            return Err(VqError::Malformed("unsupported version"));
        }
        let dim = bytes[5] as usize;
        let bits = bytes[6] as u32;
        if dim == 0 {
            return Err(VqError::Malformed("zero dimension"));
        }
        if bits > MAX_BITS {
            return Err(VqError::Malformed("codebook too large"));
        }
        let count = (1usize << bits) * dim;
        let end = 7 + count * 4;
        if bytes.len() < end {
            return Err(VqError::Malformed("truncated"));
        }
        let vectors = bytes[7..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok((Self::new(dim, bits, vectors)?, end))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VqError> {
        let (cb, used) = Self::parse(bytes)?;
        if used != bytes.len() {
            return Err(VqError::Malformed("trailing bytes"));
        }
        Ok(cb)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), VqError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, VqError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    /// Lloyd iterations run, over all splitting levels.
    pub iterations: usize,
    /// Mean distortion of each Lloyd iteration, measured before its centroid update.
    pub distortion_trace: Vec<f64>,
    /// Offsets into `distortion_trace` where each splitting level starts.
    /// The trace is non-increasing within a level.
    pub level_starts: Vec<usize>,
    pub empty_cell_events: usize,
}

impl DesignReport {
    pub fn final_distortion(&self) -> f64 {
        self.distortion_trace.last().copied().unwrap_or(f64::NAN)
    }

    fn new() -> Self {
        Self {
            iterations: 0,
            distortion_trace: Vec::new(),
            level_starts: Vec::new(),
            empty_cell_events: 0,
        }
    }
}

struct LloydStep {
    codebook: Codebook,
    distortion: f64,
    assignment: Vec<usize>,
    empty_cells: usize,
}

fn check_training(training: &[Vec<f64>], dim: usize) -> Result<(), VqError> {
    if training.is_empty() {
        return Err(VqError::EmptyTraining);
    }
    for t in training {
        if t.len() != dim {
            return Err(VqError::DimensionMismatch {
                expected: dim,
                actual: t.len(),
            });
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(VqError::NonFinite("training set"));
        }
    }
    Ok(())
}

fn lloyd_step(cb: &Codebook, training: &[Vec<f64>]) -> LloydStep {
    let dim = cb.dim;
    let k = cb.len();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    let mut cell_distortion = vec![0.0; k];
    let mut farthest: Vec<Option<(usize, f64)>> = vec![None; k];
    let mut assignment = Vec::with_capacity(training.len());
    let mut total = 0.0;
    for (t, v) in training.iter().enumerate() {
        let (i, d) = cb.nearest_unchecked(v);
        assignment.push(i);
        total += d;
        counts[i] += 1;
        cell_distortion[i] += d;
        if farthest[i].is_none_or(|(_, fd)| d > fd) {
            farthest[i] = Some((t, d));
        }
        for (s, x) in sums[i * dim..(i + 1) * dim].iter_mut().zip(v) {
            *s += x;
        }
    }
    let distortion = total / training.len() as f64;

    let mut vectors = cb.vectors.clone();
    for i in 0..k {
        if counts[i] > 0 {
            let n = counts[i] as f64;
            for d in 0..dim {
                vectors[i * dim + d] = sums[i * dim + d] / n;
            }
        }
    }

    // Empty cells: move next to the centroid of the worst cells, nudged toward
    // their farthest member. The occupied codewords stay put, so the next
    // assignment cannot be worse.
    let empty: Vec<usize> = (0..k).filter(|&i| counts[i] == 0).collect();
    if !empty.is_empty() {
        let mut donors: Vec<usize> = (0..k).filter(|&i| counts[i] > 0).collect();
        donors.sort_by(|&a, &b| cell_distortion[b].total_cmp(&cell_distortion[a]).then(a.cmp(&b)));
        for (n, &e) in empty.iter().enumerate() {
            let src = donors[n % donors.len()];
            let (far, _) = farthest[src].expect("occupied cell has a member");
            for d in 0..dim {
                let c = vectors[src * dim + d];
                vectors[e * dim + d] = c + DEFAULT_EPSILON * (training[far][d] - c);
            }
        }
    }

    LloydStep {
        codebook: Codebook {
            dim,
            bits: cb.bits,
            vectors,
        },
        distortion,
        assignment,
        empty_cells: empty.len(),
    }
}

/// One generalized Lloyd iteration: nearest-neighbor partition, then centroids.
///
/// The returned distortion belongs to the partition under the input codebook.
pub fn lloyd_iteration(cb: &Codebook, training: &[Vec<f64>]) -> Result<(Codebook, f64), VqError> {
    check_training(training, cb.dim)?;
    let step = lloyd_step(cb, training);
    Ok((step.codebook, step.distortion))
}

fn run_lloyd(
    mut cb: Codebook,
    training: &[Vec<f64>],
    stop_tol: f64,
    report: &mut DesignReport,
) -> Codebook {
    report.level_starts.push(report.distortion_trace.len());
    let mut prev: Option<(f64, Vec<usize>)> = None;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let step = lloyd_step(&cb, training);
        report.iterations += 1;
        report.empty_cell_events += step.empty_cells;
        report.distortion_trace.push(step.distortion);
        cb = step.codebook;
        let settled = step.empty_cells == 0
            && prev
                .as_ref()
                .is_some_and(|(_, a)| *a == step.assignment);
        let relative = prev
            .as_ref()
            .map(|(d, _)| if *d > 0.0 { (d - step.distortion) / d } else { 0.0 });
        if settled
            || step.distortion == 0.0
            || relative.is_some_and(|r| r < stop_tol)
        {
            break;
        }
        prev = Some((step.distortion, step.assignment));
    }
    cb
}

fn validate_design(training: &[Vec<f64>], bits: u32) -> Result<usize, VqError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(VqError::InvalidBits(bits));
    }
    let dim = training.first().ok_or(VqError::EmptyTraining)?.len();
    if dim == 0 || dim > u8::MAX as usize {
        return Err(VqError::InvalidDimension(dim));
    }
    check_training(training, dim)?;
    let needed = 1usize << bits;
    if training.len() < needed {
        return Err(VqError::InsufficientTraining {
            needed,
            available: training.len(),
        });
    }
    Ok(dim)
}

fn centroid(training: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    for v in training {
        for (s, x) in c.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = training.len() as f64;
    c.iter_mut().for_each(|s| *s /= n);
    c
}

/// LBG design: split every codeword into `c(1+eps)` and `c(1-eps)`, refine
/// with Lloyd iterations, repeat until `2^bits` codewords.
pub fn lbg_design(
    training: &[Vec<f64>],
    bits: u32,
    epsilon: f64,
    stop_tol: f64,
) -> Result<(Codebook, DesignReport), VqError> {
    let dim = validate_design(training, bits)?;
    let mut report = DesignReport::new();
    let mut cb = Codebook::new(dim, 0, centroid(training, dim))?;
    for level in 1..=bits {
        let mut vectors = Vec::with_capacity(cb.vectors.len() * 2);
        for c in cb.iter() {
            vectors.extend(c.iter().map(|x| x * (1.0 + epsilon)));
            vectors.extend(c.iter().map(|x| x * (1.0 - epsilon)));
        }
        cb = Codebook::new(dim, level, vectors)?;
        cb = run_lloyd(cb, training, stop_tol, &mut report);
    }
    Ok((cb, report))
}

/// Lloyd design from `2^bits` training vectors picked by a seeded shuffle,
/// preferring vectors with distinct values.
pub fn random_init_design(
    training: &[Vec<f64>],
    bits: u32,
    seed: u64,
    stop_tol: f64,
) -> Result<(Codebook, DesignReport), VqError> {
    let dim = validate_design(training, bits)?;
    let size = 1usize << bits;
    let mut order: Vec<usize> = (0..training.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut picked: Vec<usize> = Vec::with_capacity(size);
    let mut skipped = Vec::new();
    for &i in &order {
        if picked.len() == size {
            break;
        }
        if picked.iter().any(|&p| training[p] == training[i]) {
            skipped.push(i);
        } else {
            picked.push(i);
        }
    }
    picked.extend(skipped.into_iter().take(size - picked.len()));
    let vectors = picked.iter().flat_map(|&i| training[i].iter().copied()).collect();
    let cb = Codebook::new(dim, bits, vectors)?;
    let mut report = DesignReport::new();
    let cb = run_lloyd(cb, training, stop_tol, &mut report);
    Ok((cb, report))
}
