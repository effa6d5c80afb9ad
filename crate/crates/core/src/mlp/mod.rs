//! The nonlinear vector predictor.
//!
//! A single-hidden-layer perceptron with tanh hidden units and linear outputs,
//! mapping the `P` most recent samples onto the next `N` samples. Networks are
//! retrained every frame with Levenberg-Marquardt ([`lm_train`]) from several
//! random starts, and the trained members are averaged as a [`Committee`].

mod linalg;
mod lm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use lm::{lm_train, normal_equations, NormalEquations, StopReason, TrainOutcome};

/// Input window length used by the codec.
pub const DEFAULT_INPUTS: usize = 10;
/// Hidden units used by the codec.
pub const DEFAULT_HIDDEN: usize = 2;

const BLOB_MAGIC: &[u8; 4] = b"NLMP";
const BLOB_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("no training patterns")]
    NoPatterns,
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed network blob: {0}")]
    MalformedBlob(&'static str),
}

/// Weights of a `P-H-N` perceptron, stored as one flat parameter vector.
///
/// Layout: hidden weights (`H x P`, row-major), hidden biases (`H`), output
/// weights (`N x H`, row-major), output biases (`N`).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

impl MlpNetwork {
    pub fn param_count(inputs: usize, hidden: usize, outputs: usize) -> usize {
        hidden * inputs + hidden + outputs * hidden + outputs
    }

    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            inputs,
            hidden,
            outputs,
            params: vec![0.0; Self::param_count(inputs, hidden, outputs)],
        }
    }

    pub fn from_params(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        params: Vec<f64>,
    ) -> Result<Self, MlpError> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(MlpError::InvalidTopology(format!(
                "{inputs}-{hidden}-{outputs}"
            )));
        }
        let expected = Self::param_count(inputs, hidden, outputs);
        if params.len() != expected {
            return Err(MlpError::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(MlpError::InvalidTopology("non-finite weight".into()));
        }
        Ok(Self {
            inputs,
            hidden,
            outputs,
            params,
        })
    }

    /// Uniform weights in `[-0.5, 0.5] / sqrt(fan_in)` for each layer.
    pub fn random<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        let hidden_scale = 1.0 / (inputs as f64).sqrt();
        let out_scale = 1.0 / (hidden as f64).sqrt();
        let hidden_end = net.w_out_index(0, 0);
        for (i, p) in net.params.iter_mut().enumerate() {
            let scale = if i < hidden_end { hidden_scale } else { out_scale };
            *p = rng.random_range(-0.5..=0.5) * scale;
        }
        net
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w_hidden_index(&self, h: usize, j: usize) -> usize {
        h * self.inputs + j
    }

    pub fn b_hidden_index(&self, h: usize) -> usize {
        self.hidden * self.inputs + h
    }

    pub fn w_out_index(&self, k: usize, h: usize) -> usize {
        self.hidden * self.inputs + self.hidden + k * self.hidden + h
    }

    pub fn b_out_index(&self, k: usize) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + k
    }

    pub fn set_b_out(&mut self, k: usize, value: f64) {
        let i = self.b_out_index(k);
        self.params[i] = value;
    }

    fn check_input(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.inputs {
            return Err(MlpError::DimensionMismatch {
                expected: self.inputs,
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// `w_out * tanh(w_hidden * input + b_hidden) + b_out`
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        let mut act = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.outputs];
        self.forward_into(input, &mut act, &mut out);
        Ok(out)
    }

    /// Hidden activations into `act`, outputs into `out`. Lengths are not checked.
    pub(crate) fn forward_into(&self, input: &[f64], act: &mut [f64], out: &mut [f64]) {
        self.hidden_into(input, act);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.output_k(k, act);
        }
    }

    pub(crate) fn hidden_into(&self, input: &[f64], act: &mut [f64]) {
        let p = self.inputs;
        let w = &self.params;
        let bias = self.b_hidden_index(0);
        for (h, a) in act.iter_mut().enumerate() {
            let row = &w[h * p..(h + 1) * p];
            let mut z = w[bias + h];
            for (wj, xj) in row.iter().zip(input) {
                z += wj * xj;
            }
            *a = z.tanh();
        }
    }

    #[inline]
    pub(crate) fn output_k(&self, k: usize, act: &[f64]) -> f64 {
        let base = self.w_out_index(k, 0);
        let mut y = self.params[self.b_out_index(k)];
        for (v, a) in self.params[base..base + self.hidden].iter().zip(act) {
            y += v * a;
        }
        y
    }

    /// `N x W` matrix (row-major) of output derivatives with respect to every
    /// parameter, evaluated at `input`.
    pub fn jacobian(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        let w_count = self.params.len();
        let mut act = vec![0.0; self.hidden];
        self.hidden_into(input, &mut act);
        let mut jac = vec![0.0; self.outputs * w_count];
        for k in 0..self.outputs {
            let row = &mut jac[k * w_count..(k + 1) * w_count];
            for h in 0..self.hidden {
                let c = self.params[self.w_out_index(k, h)] * (1.0 - act[h] * act[h]);
                for (j, x) in input.iter().enumerate() {
                    row[self.w_hidden_index(h, j)] = c * x;
                }
                row[self.b_hidden_index(h)] = c;
                row[self.w_out_index(k, h)] = act[h];
            }
            row[self.b_out_index(k)] = 1.0;
        }
        Ok(jac)
    }

    /// Sum of squared weights.
    pub fn ssw(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.params.len() * 8);
        out.extend_from_slice(BLOB_MAGIC);
        out.push(BLOB_VERSION);
        out.push(self.inputs as u8);
        out.push(self.hidden as u8);
        out.push(self.outputs as u8);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MlpError> {
        if bytes.len() < 8 || &bytes[..4] != BLOB_MAGIC {
            return Err(MlpError::MalformedBlob("bad magic"));
        }
        if bytes[4] != BLOB_VERSION {
            return Err(MlpError::MalformedBlob("unsupported version"));
        }
        let (inputs, hidden, outputs) = (bytes[5] as usize, bytes[6] as usize, bytes[7] as usize);
        let body = &bytes[8..];
        if body.len() != Self::param_count(inputs, hidden, outputs) * 8 {
            return Err(MlpError::MalformedBlob("length does not match topology"));
        }
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_params(inputs, hidden, outputs, params)
    }
}

/// One input window and the samples that follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Builds `frame_length` patterns with a one-sample shift.
///
/// Uses the last `inputs + frame_length + outputs - 1` samples of `history`.
/// Pattern `i` takes `inputs` samples starting at offset `i` as input and the
/// following `outputs` samples as target.
pub fn build_training_patterns(
    history: &[f64],
    inputs: usize,
    outputs: usize,
    frame_length: usize,
) -> Result<Vec<TrainingPattern>, MlpError> {
    if inputs == 0 || outputs == 0 {
        return Err(MlpError::InvalidTopology(format!(
            "{inputs} inputs, {outputs} outputs"
        )));
    }
    let needed = inputs + frame_length + outputs - 1;
    if history.len() < needed {
        return Err(MlpError::InsufficientHistory {
            needed,
            available: history.len(),
        });
    }
    let window = &history[history.len() - needed..];
    Ok((0..frame_length)
        .map(|i| TrainingPattern {
            input: window[i..i + inputs].to_vec(),
            target: window[i + inputs..i + inputs + outputs].to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Evidence-based re-estimation of `alpha` and `beta` after every accepted step.
    Bayesian { alpha_init: f64, beta_init: f64 },
    /// Constant objective `beta * SSE + alpha * SSW`.
    Fixed { alpha: f64, beta: f64 },
}

impl Regularization {
    pub fn unregularized() -> Self {
        Regularization::Fixed {
            alpha: 0.0,
            beta: 1.0,
        }
    }

    pub(crate) fn initial(&self) -> (f64, f64) {
        match *self {
            Regularization::Bayesian {
                alpha_init,
                beta_init,
            } => (alpha_init, beta_init),
            Regularization::Fixed { alpha, beta } => (alpha, beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub cost_tolerance: f64,
    pub regularization: Regularization,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            cost_tolerance: 1e-6,
            regularization: Regularization::Bayesian {
                alpha_init: 0.01,
                beta_init: 1.0,
            },
            restarts: 5,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::InvalidConfig(m.to_string()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return bad("lambda_init must be positive");
        }
        if !(self.lambda_up > 1.0) || !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return bad("lambda_up must exceed 1 and lambda_down lie in (0, 1)");
        }
        if !(self.cost_tolerance >= 0.0) {
            return bad("cost_tolerance must be non-negative");
        }
        let (alpha, beta) = self.regularization.initial();
        if !(alpha >= 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return bad("regularization needs alpha >= 0 and beta > 0");
        }
        Ok(())
    }
}

/// Networks trained from independent initializations; predictions are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    members: Vec<MlpNetwork>,
}

impl Committee {
    pub fn new(members: Vec<MlpNetwork>) -> Result<Self, MlpError> {
        let first = members
            .first()
            .ok_or_else(|| MlpError::InvalidTopology("empty committee".into()))?;
        let shape = (first.inputs, first.hidden, first.outputs);
        if members
            .iter()
            .any(|m| (m.inputs, m.hidden, m.outputs) != shape)
        {
            return Err(MlpError::InvalidTopology(
                "committee members differ in topology".into(),
            ));
        }
        Ok(Self { members })
    }

    /// A one-member committee whose prediction is identically zero.
    pub fn zero(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            members: vec![MlpNetwork::zeros(inputs, hidden, outputs)],
        }
    }

    pub fn members(&self) -> &[MlpNetwork] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn inputs(&self) -> usize {
        self.members[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.members[0].outputs
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.members[0].check_input(input)?;
        let mut out = vec![0.0; self.outputs()];
        self.predict_into(input, &mut out);
        Ok(out)
    }

    /// Mean over members, accumulated in member order.
    pub(crate) fn predict_into(&self, input: &[f64], out: &mut [f64]) {
        let mut act = vec![0.0; self.members[0].hidden];
        out.iter_mut().for_each(|o| *o = 0.0);
        for m in &self.members {
            m.hidden_into(input, &mut act);
            for (k, o) in out.iter_mut().enumerate() {
                *o += m.output_k(k, &act);
            }
        }
        let k = self.members.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
    }

    /// Committee mean of output 0 only (scalar prediction with a vector-trained net).
    pub(crate) fn predict_first(&self, input: &[f64]) -> f64 {
        let mut act = vec![0.0; self.members[0].hidden];
        let mut sum = 0.0;
        for m in &self.members {
            m.hidden_into(input, &mut act);
            sum += m.output_k(0, &act);
        }
        sum / self.members.len() as f64
    }
}

/// Deterministic generator for restart `index` of a run seeded by `seed`.
pub fn restart_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Trains `config.restarts` networks from independent random initializations.
///
/// A member whose final cost is not finite is retrained once from a follow-on
/// stream and dropped if that fails too. If every member is dropped the
/// committee falls back to the zero predictor.
pub fn multi_start_train(
    patterns: &[TrainingPattern],
    hidden: usize,
    config: &TrainConfig,
) -> Result<Committee, MlpError> {
    config.validate()?;
    let first = patterns.first().ok_or(MlpError::NoPatterns)?;
    let (inputs, outputs) = (first.input.len(), first.target.len());
    if hidden == 0 {
        return Err(MlpError::InvalidTopology("zero hidden units".into()));
    }
    let restarts = config.restarts as u64;
    let mut members = Vec::with_capacity(config.restarts);
    for r in 0..restarts {
        for stream in [r, r + restarts] {
            let mut rng = restart_rng(config.rng_seed, stream);
            let init = MlpNetwork::random(inputs, hidden, outputs, &mut rng);
            let outcome = lm_train(patterns, init, config)?;
            if outcome.cost.is_finite() {
                members.push(outcome.network);
                break;
            }
        }
    }
    if members.is_empty() {
        return Ok(Committee::zero(inputs, hidden, outputs));
    }
    Committee::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_net(seed: u64, inputs: usize, hidden: usize, outputs: usize) -> MlpNetwork {
        let mut rng = restart_rng(seed, 0);
        let mut net = MlpNetwork::random(inputs, hidden, outputs, &mut rng);
        // push weights beyond the init range so the tanh nonlinearity matters
        for p in net.params_mut() {
            *p *= 3.0;
        }
        net
    }

    fn random_input(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = restart_rng(seed, 99);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpNetwork::zeros(10, 2, 3);
        assert_eq!(net.forward(&[0.3; 10]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn output_bias_passes_through() {
        let mut net = MlpNetwork::zeros(10, 2, 2);
        net.set_b_out(0, 0.7);
        net.set_b_out(1, -0.1);
        assert_eq!(net.forward(&[0.9; 10]).unwrap(), vec![0.7, -0.1]);
        assert_eq!(net.forward(&[-0.2; 10]).unwrap(), vec![0.7, -0.1]);
    }

    #[test]
    fn forward_matches_direct_formula() {
        let net = random_net(3, 10, 2, 4);
        let x = random_input(4, 10);
        let got = net.forward(&x).unwrap();
        // independent evaluation straight from the layout description
        let p = net.params();
        let (wh, rest) = p.split_at(20);
        let (bh, rest) = rest.split_at(2);
        let (wo, bo) = rest.split_at(8);
        let hidden: Vec<f64> = (0..2)
            .map(|h| {
                let s: f64 = (0..10).map(|j| wh[h * 10 + j] * x[j]).sum::<f64>() + bh[h];
                s.tanh()
            })
            .collect();
        for k in 0..4 {
            let want = wo[k * 2] * hidden[0] + wo[k * 2 + 1] * hidden[1] + bo[k];
            assert!((got[k] - want).abs() < 1e-14, "{k}: {} vs {want}", got[k]);
        }
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = MlpNetwork::zeros(10, 2, 1);
        assert_eq!(
            net.forward(&[0.0; 9]),
            Err(MlpError::DimensionMismatch {
                expected: 10,
                actual: 9
            })
        );
    }

    #[test]
    fn forward_is_bitwise_reproducible() {
        let net = random_net(11, 10, 2, 6);
        let x = random_input(12, 10);
        let a = net.forward(&x).unwrap();
        let b = net.clone().forward(&x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn param_count_formula() {
        for n in 1..=6 {
            assert_eq!(MlpNetwork::param_count(10, 2, n), 2 * 10 + 2 + 2 * n + n);
            assert_eq!(MlpNetwork::zeros(10, 2, n).params().len(), 22 + 3 * n);
        }
    }

    #[test]
    fn jacobian_output_bias_columns() {
        let net = random_net(5, 10, 2, 3);
        let x = random_input(6, 10);
        let jac = net.jacobian(&x).unwrap();
        let w = net.params().len();
        for k in 0..3 {
            for kk in 0..3 {
                let want = if k == kk { 1.0 } else { 0.0 };
                assert_eq!(jac[k * w + net.b_out_index(kk)], want);
            }
        }
    }

    #[test]
    fn jacobian_of_zero_net_collapses() {
        let mut net = MlpNetwork::zeros(10, 2, 2);
        let bh0 = net.b_hidden_index(0);
        net.params_mut()[bh0] = 0.4;
        net.params_mut()[bh0 + 1] = -0.9;
        let x = random_input(7, 10);
        let jac = net.jacobian(&x).unwrap();
        let w = net.params().len();
        for k in 0..2 {
            assert_eq!(jac[k * w + net.w_out_index(k, 0)], 0.4f64.tanh());
            assert_eq!(jac[k * w + net.w_out_index(k, 1)], (-0.9f64).tanh());
            // hidden columns vanish because every output weight is zero
            for i in 0..22 {
                assert_eq!(jac[k * w + i], 0.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let h = 1e-5;
        for trial in 0..20u64 {
            let net = random_net(100 + trial, 10, 2, 1 + (trial as usize % 6));
            let x = random_input(200 + trial, 10);
            let jac = net.jacobian(&x).unwrap();
            let w = net.params().len();
            for i in 0..w {
                let mut plus = net.clone();
                plus.params_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[i] -= h;
                let yp = plus.forward(&x).unwrap();
                let ym = minus.forward(&x).unwrap();
                for k in 0..net.outputs() {
                    let fd = (yp[k] - ym[k]) / (2.0 * h);
                    let an = jac[k * w + i];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < 1e-4, "trial {trial} param {i} out {k}: {an} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn unrolled_patterns() {
        let x: Vec<f64> = (0..5).map(|v| v as f64).collect();
        let pats = build_training_patterns(&x, 2, 1, 3).unwrap();
        let got: Vec<(Vec<f64>, Vec<f64>)> =
            pats.into_iter().map(|p| (p.input, p.target)).collect();
        assert_eq!(
            got,
            vec![
                (vec![0.0, 1.0], vec![2.0]),
                (vec![1.0, 2.0], vec![3.0]),
                (vec![2.0, 3.0], vec![4.0]),
            ]
        );
    }

    #[test]
    fn pattern_counts_and_shift() {
        let x: Vec<f64> = (0..600).map(|v| v as f64).collect();
        let pats = build_training_patterns(&x, 10, 2, 200).unwrap();
        assert_eq!(pats.len(), 200);
        for w in pats.windows(2) {
            assert_eq!(w[1].input[0] - w[0].input[0], 1.0);
        }
        // targets end at the last available sample
        assert_eq!(pats.last().unwrap().target, vec![598.0, 599.0]);
        assert_eq!(build_training_patterns(&x, 10, 6, 204).unwrap().len(), 204);
    }

    #[test]
    fn pattern_history_too_short() {
        let x = vec![0.0; 210];
        assert_eq!(
            build_training_patterns(&x, 10, 2, 200),
            Err(MlpError::InsufficientHistory {
                needed: 211,
                available: 210
            })
        );
    }

    #[test]
    fn committee_averages() {
        let mut a = MlpNetwork::zeros(10, 2, 2);
        a.set_b_out(0, 1.0);
        let mut b = MlpNetwork::zeros(10, 2, 2);
        b.set_b_out(1, 1.0);
        let c = Committee::new(vec![a.clone(), b]).unwrap();
        assert_eq!(c.predict(&[0.1; 10]).unwrap(), vec![0.5, 0.5]);
        let single = Committee::new(vec![a.clone()]).unwrap();
        assert_eq!(
            single.predict(&[0.1; 10]).unwrap(),
            a.forward(&[0.1; 10]).unwrap()
        );
    }

    #[test]
    fn committee_mean_matches_oracle() {
        let members: Vec<_> = (0..5).map(|i| random_net(40 + i, 10, 2, 3)).collect();
        let x = random_input(50, 10);
        let c = Committee::new(members.clone()).unwrap();
        let got = c.predict(&x).unwrap();
        for k in 0..3 {
            let want: f64 =
                members.iter().map(|m| m.forward(&x).unwrap()[k]).sum::<f64>() / 5.0;
            assert!((got[k] - want).abs() < 1e-15);
        }
        assert_eq!(c.predict_first(&x), got[0]);
    }

    #[test]
    fn committee_rejects_mixed_topology() {
        let a = MlpNetwork::zeros(10, 2, 2);
        let b = MlpNetwork::zeros(10, 2, 3);
        assert!(Committee::new(vec![a, b]).is_err());
        assert!(Committee::new(vec![]).is_err());
    }

    #[test]
    fn blob_round_trip_and_errors() {
        let net = random_net(9, 10, 2, 4);
        let bytes = net.to_bytes();
        assert_eq!(bytes.len(), 8 + 8 * net.params().len());
        assert_eq!(MlpNetwork::from_bytes(&bytes).unwrap(), net);
        let mut bad = bytes.clone();
        bad[4] = 7;
        assert!(MlpNetwork::from_bytes(&bad).is_err());
        assert!(MlpNetwork::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            restarts: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            lambda_init: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
