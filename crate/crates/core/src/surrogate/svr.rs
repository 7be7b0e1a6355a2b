//! Epsilon-insensitive support vector regression with a Gaussian kernel.
//!
//! The dual is written in terms of `gamma_s = alpha_s - beta_s`:
//!
//! ```text
//! max  -1/2 gamma' K gamma + y' gamma - eps |gamma|_1
//! s.t. sum gamma = 0,  -C <= gamma_s <= C
//! ```
//!
//! and solved by pairwise coordinate ascent: each step moves a maximal
//! KKT-violating pair along `gamma_i += t, gamma_j -= t` with an exact line
//! search over the piecewise-quadratic objective.

use serde::{Deserialize, Serialize};

use super::{rbfn::default_width, squared_distance, TrainingSet};
use crate::error::{Result, SbdError};

const GAP_TOLERANCE: f64 = 1e-6;
const MAX_PASSES: usize = 10_000;

/// Hyperparameters; `None` picks the data-driven default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrParams {
    /// Tube half-width. Default: 1% of the target range.
    pub epsilon: Option<f64>,
    /// Box constraint. Default: 100 x target range.
    pub c: Option<f64>,
    /// Gaussian kernel width. Default: mean nearest-neighbour distance.
    pub kernel_width: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SvrModel {
    inputs: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    bias: f64,
    kernel_width: f64,
    epsilon: f64,
    c: f64,
    duality_gap: f64,
    passes: usize,
}

impl SvrModel {
    pub fn dims(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// `alpha_s - beta_s` per training sample.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    pub fn duality_gap(&self) -> f64 {
        self.duality_gap
    }

    pub fn passes(&self) -> usize {
        self.passes
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.kernel_width * self.kernel_width);
        self.bias
            + self
                .inputs
                .iter()
                .zip(&self.coeffs)
                .filter(|(_, g)| **g != 0.0)
                .map(|(xs, g)| g * (-squared_distance(xs, x) * inv).exp())
                .sum::<f64>()
    }
}

struct Dual<'a> {
    kernel: &'a [Vec<f64>],
    y: &'a [f64],
    eps: f64,
    c: f64,
    gamma: Vec<f64>,
    /// `y - K gamma`
    grad: Vec<f64>,
}

impl Dual<'_> {
    /// Right derivative of the objective when increasing `gamma_i`.
    fn up(&self, i: usize) -> f64 {
        self.grad[i] - if self.gamma[i] >= 0.0 { self.eps } else { -self.eps }
    }

    /// Left derivative: decreasing `gamma_i` by `d` changes the objective by `-down * d`.
    fn down(&self, i: usize) -> f64 {
        self.grad[i] - if self.gamma[i] > 0.0 { self.eps } else { -self.eps }
    }

    /// Maximal violating pair and its violation `up_i - down_j`.
    fn select(&self) -> Option<(usize, usize, f64)> {
        let n = self.gamma.len();
        let mut best_up: Option<(usize, f64)> = None;
        let mut best_down: Option<(usize, f64)> = None;
        for s in 0..n {
            if self.gamma[s] < self.c {
                let u = self.up(s);
                if best_up.is_none_or(|(_, b)| u > b) {
                    best_up = Some((s, u));
                }
            }
            if self.gamma[s] > -self.c {
                let d = self.down(s);
                if best_down.is_none_or(|(_, b)| d < b) {
                    best_down = Some((s, d));
                }
            }
        }
        match (best_up, best_down) {
            (Some((i, u)), Some((j, d))) if i != j => Some((i, j, u - d)),
            _ => None,
        }
    }

    fn line_objective(&self, i: usize, j: usize, eta: f64, t: f64) -> f64 {
        let (gi, gj) = (self.gamma[i], self.gamma[j]);
        -0.5 * eta * t * t + (self.grad[i] - self.grad[j]) * t
            - self.eps * ((gi + t).abs() - gi.abs() + (gj - t).abs() - gj.abs())
    }

    /// Exact maximizer of the concave piecewise-quadratic step objective.
    fn step(&mut self, i: usize, j: usize) -> f64 {
        let eta = (self.kernel[i][i] + self.kernel[j][j] - 2.0 * self.kernel[i][j]).max(1e-12);
        let hi = (self.c - self.gamma[i]).min(self.gamma[j] + self.c);
        if hi <= 0.0 {
            return 0.0;
        }
        let mut knots = vec![0.0, hi];
        for b in [-self.gamma[i], self.gamma[j]] {
            if b > 0.0 && b < hi {
                knots.push(b);
            }
        }
        knots.sort_by(|a, b| a.total_cmp(b));
        let mut candidates = knots.clone();
        let base = self.grad[i] - self.grad[j];
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let si = (self.gamma[i] + mid).signum();
            let sj = (self.gamma[j] - mid).signum();
            let slope = base - self.eps * (si - sj);
            candidates.push((slope / eta).clamp(w[0], w[1]));
        }
        let mut best_t = 0.0;
        let mut best_val = 0.0;
        for t in candidates {
            let v = self.line_objective(i, j, eta, t);
            if v > best_val {
                best_val = v;
                best_t = t;
            }
        }
        if best_t > 0.0 {
            self.gamma[i] += best_t;
            self.gamma[j] -= best_t;
            // snap onto the bounds and the kink to keep the active set exact
            for s in [i, j] {
                if (self.gamma[s] - self.c).abs() < 1e-12 * self.c {
                    self.gamma[s] = self.c;
                } else if (self.gamma[s] + self.c).abs() < 1e-12 * self.c {
                    self.gamma[s] = -self.c;
                } else if self.gamma[s].abs() < 1e-14 * self.c {
                    self.gamma[s] = 0.0;
                }
            }
            for (s, g) in self.grad.iter_mut().enumerate() {
                *g -= best_t * (self.kernel[s][i] - self.kernel[s][j]);
            }
        }
        best_t
    }

    /// Bias from the KKT conditions: average over free vectors, otherwise the
    /// midpoint of the feasible interval.
    fn bias(&self) -> f64 {
        let mut free = Vec::new();
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for (&g, &grad) in self.gamma.iter().zip(&self.grad) {
            if g == 0.0 {
                lower = lower.max(grad - self.eps);
                upper = upper.min(grad + self.eps);
            } else if g >= self.c {
                upper = upper.min(grad - self.eps);
            } else if g <= -self.c {
                lower = lower.max(grad + self.eps);
            } else if g > 0.0 {
                free.push(grad - self.eps);
            } else {
                free.push(grad + self.eps);
            }
        }
        if !free.is_empty() {
            return free.iter().sum::<f64>() / free.len() as f64;
        }
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    }

    fn dual_value(&self) -> f64 {
        // -1/2 g'Kg + y'g - eps|g| with K g = y - grad
        let quad: f64 = self
            .gamma
            .iter()
            .zip(self.y.iter().zip(&self.grad))
            .map(|(g, (y, gr))| g * (y - gr))
            .sum();
        let linear: f64 = self.gamma.iter().zip(self.y).map(|(g, y)| g * y).sum();
        let l1: f64 = self.gamma.iter().map(|g| g.abs()).sum();
        -0.5 * quad + linear - self.eps * l1
    }

    fn primal_value(&self, bias: f64) -> f64 {
        let quad: f64 = self
            .gamma
            .iter()
            .zip(self.y.iter().zip(&self.grad))
            .map(|(g, (y, gr))| g * (y - gr))
            .sum();
        // residual y - f(x) = grad - bias
        let slack: f64 = self
            .grad
            .iter()
            .map(|gr| ((gr - bias).abs() - self.eps).max(0.0))
            .sum();
        0.5 * quad + self.c * slack
    }

    fn relative_gap(&self) -> f64 {
        let b = self.bias();
        let primal = self.primal_value(b);
        let dual = self.dual_value();
        (primal - dual).max(0.0) / (1.0 + primal.abs().max(dual.abs()))
    }
}

pub fn fit_svr(data: &TrainingSet, params: &SvrParams) -> Result<SvrModel> {
    if data.is_empty() {
        return Err(SbdError::EmptyTrainingSet);
    }
    let range = data.target_range();
    let epsilon = params.epsilon.unwrap_or(0.01 * range);
    let c = params.c.unwrap_or(if range > 0.0 { 100.0 * range } else { 1.0 });
    let kernel_width = params
        .kernel_width
        .unwrap_or_else(|| default_width(data.inputs()));
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(SbdError::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(SbdError::InvalidArgument(format!("C must be > 0, got {c}")));
    }
    if !(kernel_width > 0.0 && kernel_width.is_finite()) {
        return Err(SbdError::InvalidArgument(format!(
            "kernel width must be > 0, got {kernel_width}"
        )));
    }

    let inputs = data.inputs();
    let n = inputs.len();
    let inv = 1.0 / (2.0 * kernel_width * kernel_width);
    let kernel: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (-squared_distance(&inputs[i], &inputs[j]) * inv).exp())
                .collect()
        })
        .collect();
    let y = data.targets();
    let mut dual = Dual {
        kernel: &kernel,
        y,
        eps: epsilon,
        c,
        gamma: vec![0.0; n],
        grad: y.to_vec(),
    };

    let kkt_tolerance = 1e-9 * (1.0 + range);
    let mut passes = 0;
    let mut gap = dual.relative_gap();
    'outer: while passes < MAX_PASSES {
        for _ in 0..n.max(1) {
            match dual.select() {
                Some((i, j, violation)) if violation > kkt_tolerance => {
                    if dual.step(i, j) == 0.0 {
                        break 'outer;
                    }
                }
                _ => break 'outer,
            }
        }
        passes += 1;
        gap = dual.relative_gap();
        if gap <= GAP_TOLERANCE {
            break;
        }
    }
    gap = gap.min(dual.relative_gap());
    if passes >= MAX_PASSES && gap > GAP_TOLERANCE {
        return Err(SbdError::NoConvergence { passes, gap });
    }

    let bias = dual.bias();
    Ok(SvrModel {
        inputs: inputs.to_vec(),
        coeffs: dual.gamma,
        bias,
        kernel_width,
        epsilon,
        c,
        duality_gap: gap,
        passes,
    })
}
