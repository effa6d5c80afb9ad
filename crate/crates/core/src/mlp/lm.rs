//! Levenberg-Marquardt training with optional evidence-based regularization.
//!
//! The objective is `F = beta * SSE + alpha * SSW`. Each iteration solves
//! `(J^T J + (alpha/beta + lambda) I) delta = J^T e - (alpha/beta) w`, which is
//! the damped Gauss-Newton step for `F / beta`.

use super::linalg::Cholesky;
use super::{MlpError, MlpNetwork, Regularization, TrainConfig, TrainingPattern};

const LAMBDA_MAX: f64 = 1e10;
const LAMBDA_MIN: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Iteration budget exhausted.
    MaxIterations,
    /// Relative decrease of the objective fell below the tolerance.
    Converged,
    /// No acceptable step before the damping limit; the normal equations are
    /// singular or the current point is a numerical minimum.
    DampingLimit,
    /// The objective reached zero.
    PerfectFit,
}

/// One accepted step: objective before and after, both under the
/// hyperparameters in effect when the step was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptedStep {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: MlpNetwork,
    /// Final objective under the final hyperparameters.
    pub cost: f64,
    pub sse: f64,
    pub ssw: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub steps: Vec<AcceptedStep>,
    pub stop: StopReason,
}

impl TrainOutcome {
    /// The initial objective followed by the objective after every accepted step.
    ///
    /// Non-increasing for fixed regularization. Under evidence updates the
    /// objective itself moves between steps, so only each step's own
    /// `before > after` is guaranteed.
    pub fn cost_trace(&self) -> Vec<f64> {
        let mut trace = Vec::with_capacity(self.steps.len() + 1);
        trace.push(self.steps.first().map_or(self.cost, |s| s.before));
        trace.extend(self.steps.iter().map(|s| s.after));
        trace
    }
}

/// `J^T J`, `J^T e` and the sum of squared errors over a pattern set.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub size: usize,
    /// Row-major `size x size`.
    pub jtj: Vec<f64>,
    pub jte: Vec<f64>,
    pub sse: f64,
}

/// Accumulates the normal equations in pattern order.
///
/// Each Jacobian row touches only the hidden parameters and the weights of a
/// single output unit, so the products are built block-wise instead of from
/// dense rows.
pub fn normal_equations(
    net: &MlpNetwork,
    patterns: &[TrainingPattern],
) -> Result<NormalEquations, MlpError> {
    check_patterns(net, patterns)?;
    let products = input_products(patterns);
    Ok(accumulate(net, patterns, &products))
}

/// Upper triangle (row-major, diagonal included) of `z z^T` for every
/// pattern, where `z` is the input extended by a constant 1.
fn input_products(patterns: &[TrainingPattern]) -> Vec<f64> {
    let zlen = patterns.first().map_or(0, |p| p.input.len() + 1);
    let vl = zlen * (zlen + 1) / 2;
    let mut out = Vec::with_capacity(patterns.len() * vl);
    let mut z = vec![1.0; zlen];
    for pat in patterns {
        z[..zlen - 1].copy_from_slice(&pat.input);
        for j in 0..zlen {
            out.extend(z[j..].iter().map(|v| v * z[j]));
        }
    }
    out
}

fn accumulate(net: &MlpNetwork, patterns: &[TrainingPattern], products: &[f64]) -> NormalEquations {
    let p = net.inputs();
    let hn = net.hidden();
    let n = net.outputs();
    let zlen = p + 1;
    let vl = zlen * (zlen + 1) / 2;
    let hid_len = hn * zlen;
    let blk = hn + 1;
    let m = n * hn * blk;
    let size = net.params().len();

    // compact parameter order: per hidden unit (weights, bias), then per
    // output unit (weights, bias)
    let mut perm = vec![0usize; size];
    for h in 0..hn {
        for j in 0..p {
            perm[h * zlen + j] = net.w_hidden_index(h, j);
        }
        perm[h * zlen + p] = net.b_hidden_index(h);
    }
    for k in 0..n {
        for h in 0..hn {
            perm[hid_len + k * blk + h] = net.w_out_index(k, h);
        }
        perm[hid_len + k * blk + hn] = net.b_out_index(k);
    }

    let pairs: Vec<(usize, usize)> = (0..hn).flat_map(|h| (h..hn).map(move |h2| (h, h2))).collect();
    let mut hh = vec![0.0; pairs.len() * vl];
    // ho[j][(k, h, b)]: hidden input j against output k's weight on b, via hidden h
    let mut ho = vec![0.0; zlen * m];
    let mut q = vec![0.0; blk * blk];
    let mut gc = vec![0.0; size];
    let mut sse = 0.0;

    let w_out: Vec<f64> = (0..n)
        .flat_map(|k| (0..hn).map(move |h| (k, h)))
        .map(|(k, h)| net.params()[net.w_out_index(k, h)])
        .collect();
    let mut act = vec![0.0; hn];
    let mut err = vec![0.0; n];
    let mut c = vec![0.0; n * hn];
    let mut g = vec![0.0; m];
    let mut z = vec![1.0; zlen];
    let mut at = vec![1.0; blk];

    for (pat, zz) in patterns.iter().zip(products.chunks_exact(vl)) {
        net.hidden_into(&pat.input, &mut act);
        z[..p].copy_from_slice(&pat.input);
        at[..hn].copy_from_slice(&act);
        for k in 0..n {
            let e = pat.target[k] - net.output_k(k, &act);
            err[k] = e;
            sse += e * e;
            for h in 0..hn {
                c[k * hn + h] = w_out[k * hn + h] * (1.0 - act[h] * act[h]);
            }
        }

        for (block, &(h, h2)) in hh.chunks_exact_mut(vl).zip(&pairs) {
            let shh: f64 = (0..n).map(|k| c[k * hn + h] * c[k * hn + h2]).sum();
            for (r, &u) in block.iter_mut().zip(zz) {
                *r += shh * u;
            }
        }
        for (gb, &ckh) in g.chunks_exact_mut(blk).zip(&c) {
            for (gv, &av) in gb.iter_mut().zip(&at) {
                *gv = ckh * av;
            }
        }
        for (row, &zj) in ho.chunks_exact_mut(m).zip(&z) {
            for (r, &gv) in row.iter_mut().zip(&g) {
                *r += zj * gv;
            }
        }
        for (row, &ab) in q.chunks_exact_mut(blk).zip(&at) {
            for (r, &av) in row.iter_mut().zip(&at) {
                *r += ab * av;
            }
        }

        for h in 0..hn {
            let t: f64 = (0..n).map(|k| c[k * hn + h] * err[k]).sum();
            for (gv, &zj) in gc[h * zlen..(h + 1) * zlen].iter_mut().zip(&z) {
                *gv += t * zj;
            }
        }
        for k in 0..n {
            let col0 = hid_len + k * blk;
            for (gv, &av) in gc[col0..col0 + blk].iter_mut().zip(&at) {
                *gv += av * err[k];
            }
        }
    }

    // upper triangle in compact order
    let vech = |j: usize, j2: usize| {
        let (a, b) = if j <= j2 { (j, j2) } else { (j2, j) };
        a * zlen - a * (a + 1) / 2 + b
    };
    let mut ac = vec![0.0; size * size];
    for (block, &(h, h2)) in hh.chunks_exact(vl).zip(&pairs) {
        for j in 0..zlen {
            let start = if h2 == h { j } else { 0 };
            for j2 in start..zlen {
                ac[(h * zlen + j) * size + h2 * zlen + j2] = block[vech(j, j2)];
            }
        }
    }
    for (j, row) in ho.chunks_exact(m).enumerate() {
        for k in 0..n {
            for h in 0..hn {
                let src = &row[(k * hn + h) * blk..(k * hn + h + 1) * blk];
                let dst = (h * zlen + j) * size + hid_len + k * blk;
                ac[dst..dst + blk].copy_from_slice(src);
            }
        }
    }
    for k in 0..n {
        let col0 = hid_len + k * blk;
        for b in 0..blk {
            for b2 in b..blk {
                ac[(col0 + b) * size + col0 + b2] = q[b * blk + b2];
            }
        }
    }

    let mut jtj = vec![0.0; size * size];
    let mut jte = vec![0.0; size];
    for i in 0..size {
        jte[perm[i]] = gc[i];
        for j in i..size {
            let v = ac[i * size + j];
            jtj[perm[i] * size + perm[j]] = v;
            jtj[perm[j] * size + perm[i]] = v;
        }
    }
    NormalEquations {
        size,
        jtj,
        jte,
        sse,
    }
}

fn check_patterns(net: &MlpNetwork, patterns: &[TrainingPattern]) -> Result<(), MlpError> {
    if patterns.is_empty() {
        return Err(MlpError::NoPatterns);
    }
    for pat in patterns {
        if pat.input.len() != net.inputs() {
            return Err(MlpError::DimensionMismatch {
                expected: net.inputs(),
                actual: pat.input.len(),
            });
        }
        if pat.target.len() != net.outputs() {
            return Err(MlpError::DimensionMismatch {
                expected: net.outputs(),
                actual: pat.target.len(),
            });
        }
    }
    Ok(())
}

fn sum_squared_error(net: &MlpNetwork, patterns: &[TrainingPattern]) -> f64 {
    let mut act = vec![0.0; net.hidden()];
    let mut sse = 0.0;
    for pat in patterns {
        net.hidden_into(&pat.input, &mut act);
        for (k, t) in pat.target.iter().enumerate() {
            let e = t - net.output_k(k, &act);
            sse += e * e;
        }
    }
    sse
}

/// Evidence re-estimation of `(alpha, beta)` from the current normal equations.
fn update_hyperparameters(
    ne: &NormalEquations,
    ssw: f64,
    n_err: usize,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    let w = ne.size as f64;
    let ratio = alpha / beta;
    let gamma = if ratio > 0.0 {
        let mut m = ne.jtj.clone();
        for i in 0..ne.size {
            m[i * ne.size + i] += ratio;
        }
        match Cholesky::factor(&m, ne.size) {
            Some(ch) => w - ratio * ch.trace_of_inverse(),
            None => return (alpha, beta),
        }
    } else {
        w
    }
    .clamp(0.0, w);
    let new_alpha = if ssw > 0.0 { gamma / (2.0 * ssw) } else { alpha };
    let n_err = n_err as f64;
    let new_beta = if ne.sse > 0.0 && n_err > gamma {
        (n_err - gamma) / (2.0 * ne.sse)
    } else {
        beta
    };
    if new_alpha.is_finite() && new_beta.is_finite() && new_beta > 0.0 {
        (new_alpha, new_beta)
    } else {
        (alpha, beta)
    }
}

/// Trains `init` on `patterns`. Only steps that lower the objective are taken.
pub fn lm_train(
    patterns: &[TrainingPattern],
    init: MlpNetwork,
    config: &TrainConfig,
) -> Result<TrainOutcome, MlpError> {
    config.validate()?;
    check_patterns(&init, patterns)?;
    let bayesian = matches!(config.regularization, Regularization::Bayesian { .. });
    let (mut alpha, mut beta) = config.regularization.initial();
    let n_err = patterns.len() * init.outputs();

    let mut net = init;
    let size = net.params().len();
    let products = input_products(patterns);
    let mut ne = accumulate(&net, patterns, &products);
    let mut ssw = net.ssw();
    let mut cost = beta * ne.sse + alpha * ssw;
    let mut lambda = config.lambda_init;
    let mut steps = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut system = vec![0.0; size * size];
    let mut rhs = vec![0.0; size];

    'outer: for _ in 0..config.max_iterations {
        if cost == 0.0 {
            stop = StopReason::PerfectFit;
            break;
        }
        let ratio = alpha / beta;
        for (r, (g, w)) in rhs.iter_mut().zip(ne.jte.iter().zip(net.params())) {
            *r = g - ratio * w;
        }
        let (candidate, cand_sse, cand_ssw, cand_cost) = loop {
            system.copy_from_slice(&ne.jtj);
            for i in 0..size {
                system[i * size + i] += ratio + lambda;
            }
            if let Some(ch) = Cholesky::factor(&system, size) {
                let delta = ch.solve(&rhs);
                let mut cand = net.clone();
                for (p, d) in cand.params_mut().iter_mut().zip(&delta) {
                    *p += d;
                }
                let c_sse = sum_squared_error(&cand, patterns);
                let c_ssw = cand.ssw();
                let c_cost = beta * c_sse + alpha * c_ssw;
                if c_cost.is_finite() && c_cost < cost {
                    break (cand, c_sse, c_ssw, c_cost);
                }
            }
            lambda *= config.lambda_up;
            if lambda > LAMBDA_MAX {
                stop = StopReason::DampingLimit;
                break 'outer;
            }
        };
        let relative = (cost - cand_cost) / cost;
        steps.push(AcceptedStep {
            before: cost,
            after: cand_cost,
        });
        lambda = (lambda * config.lambda_down).max(LAMBDA_MIN);
        net = candidate;
        ssw = cand_ssw;
        ne = accumulate(&net, patterns, &products);
        debug_assert_eq!(ne.sse.to_bits(), cand_sse.to_bits());
        if bayesian {
            (alpha, beta) = update_hyperparameters(&ne, ssw, n_err, alpha, beta);
        }
        cost = beta * ne.sse + alpha * ssw;
        if relative < config.cost_tolerance {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(TrainOutcome {
        cost,
        sse: ne.sse,
        ssw,
        alpha,
        beta,
        iterations: steps.len(),
        steps,
        stop,
        network: net,
    })
}
