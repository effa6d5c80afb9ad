#![allow(dead_code)]

//! Test material and helpers: bundled speech, a seeded speech imitation,
//! random signals and wrappers around the command-line binary.

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use nlpvq::audio::{read_pcm, write_pcm, Signal};
use nlpvq::pipeline::{design_codebooks, CodebookSet, DesignMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SAMPLE_RATE: u32 = 8000;

// (F1, F2, F3) in Hz for a handful of vowels
const VOWELS: [(f64, f64, f64); 6] = [
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
    (660.0, 1720.0, 2410.0),
];

struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = (-std::f64::consts::PI * bandwidth / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * freq / fs;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn retune(&mut self, freq: f64, bandwidth: f64, fs: f64) {
        let fresh = Self::new(freq, bandwidth, fs);
        self.a1 = fresh.a1;
        self.a2 = fresh.a2;
        self.gain = fresh.gain;
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Syllable-like bursts of voiced sound (pitch pulses through three formant
/// resonators), fricative noise and pauses. Peak-normalized to 0.6.
pub fn speech_like(seed: u64, seconds: f64) -> Signal {
    let fs = SAMPLE_RATE as f64;
    let total = (seconds * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    let mut formants: Vec<Resonator> = VOWELS[0]
        .to_array()
        .iter()
        .zip([90.0, 110.0, 170.0])
        .map(|(&f, b)| Resonator::new(f, b, fs))
        .collect();
    let mut fric = Resonator::new(2800.0, 900.0, fs);
    let mut glottal = 0.0;
    let base_pitch = rng.random_range(95.0..210.0);
    let mut phase = 0.0;

    while out.len() < total {
        let kind = rng.random_range(0..10);
        if kind < 6 {
            // voiced syllable with a gliding vowel and pitch contour
            let len = (rng.random_range(0.12..0.32) * fs) as usize;
            let (from, to) = (
                VOWELS[rng.random_range(0..VOWELS.len())],
                VOWELS[rng.random_range(0..VOWELS.len())],
            );
            let pitch0 = base_pitch * rng.random_range(0.85..1.2);
            let pitch1 = base_pitch * rng.random_range(0.8..1.15);
            let amp = rng.random_range(0.5..1.0);
            for i in 0..len {
                let t = i as f64 / len as f64;
                if i % 40 == 0 {
                    let f = [
                        from.0 + (to.0 - from.0) * t,
                        from.1 + (to.1 - from.1) * t,
                        from.2 + (to.2 - from.2) * t,
                    ];
                    for (r, (&fk, b)) in formants.iter_mut().zip(f.iter().zip([90.0, 110.0, 170.0])) {
                        r.retune(fk, b, fs);
                    }
                }
                let pitch = pitch0 + (pitch1 - pitch0) * t;
                phase += pitch / fs;
                let pulse = if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                };
                // smoothed excitation with a little aspiration noise
                glottal = 0.7 * glottal + pulse + 0.02 * rng.random_range(-1.0..1.0);
                let env = (std::f64::consts::PI * t).sin().powf(0.6);
                let mut y = 0.0;
                for (k, r) in formants.iter_mut().enumerate() {
                    y += r.tick(glottal) * [1.0, 0.6, 0.3][k];
                }
                out.push(amp * env * y);
            }
        } else if kind < 8 {
            let len = (rng.random_range(0.05..0.12) * fs) as usize;
            let amp = rng.random_range(0.05..0.15);
            for i in 0..len {
                let env = (std::f64::consts::PI * i as f64 / len as f64).sin();
                out.push(amp * env * fric.tick(rng.random_range(-1.0..1.0)) * 4.0);
            }
        } else {
            let len = (rng.random_range(0.04..0.15) * fs) as usize;
            for _ in 0..len {
                out.push(1e-3 * rng.random_range(-1.0..1.0));
            }
        }
    }
    out.truncate(total);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.6 / peak } else { 1.0 };
    let samples = out
        .into_iter()
        .map(|v| (v * scale * 32768.0).round() / 32768.0)
        .collect();
    Signal::new(samples, SAMPLE_RATE).unwrap()
}

trait ToArray {
    fn to_array(self) -> [f64; 3];
}

impl ToArray for (f64, f64, f64) {
    fn to_array(self) -> [f64; 3] {
        [self.0, self.1, self.2]
    }
}

/// Uniform noise, lightly lowpassed so the predictor has something to learn.
pub fn random_signal(seed: u64, len: usize) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = 0.0;
    let samples = (0..len)
        .map(|_| {
            y = 0.8 * y + 0.2 * rng.random_range(-0.9..0.9);
            y
        })
        .collect();
    Signal::new(samples, SAMPLE_RATE).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// One of the bundled 8 kHz speech recordings.
pub fn fixture(name: &str) -> Signal {
    read_pcm(fixture_path(name)).unwrap()
}

pub fn excerpt(signal: &Signal, start_s: f64, seconds: f64) -> Signal {
    let fs = signal.sample_rate() as f64;
    let a = ((start_s * fs) as usize).min(signal.len() - 1);
    let b = (a + (seconds * fs) as usize).min(signal.len());
    Signal::new(signal.samples()[a..b].to_vec(), signal.sample_rate()).unwrap()
}

/// LBG codebooks for mode S3, keyed by `(N, Nq)`, designed on `training`.
pub fn codebooks(training: &Signal, dim: usize, bits: &[u32], seed: u64) -> CodebookSet {
    design_codebooks(training, dim, bits, DesignMethod::default(), seed)
        .unwrap()
        .into_iter()
        .map(|d| ((dim, d.codebook.bits()), d.codebook))
        .collect()
}

pub fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlpvq"))
}

/// Runs the binary and returns (exit code, stdout, stderr).
pub fn run_cli<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let out = cli().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn write_wav(dir: &Path, name: &str, signal: &Signal) -> PathBuf {
    let path = dir.join(name);
    write_pcm(signal, &path).unwrap();
    path
}

/// Contents of every regular file in `dir`, by file name.
pub fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

/// A line on stderr that test capture does not swallow.
pub fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}
