//! Confidence-enhanced surrogate-assisted PSO (PSO-OK/C).
//!
//! The swarm flies on an ordinary Kriging model. Each point carries its
//! provenance (simulated or predicted); comparisons between points use the
//! lower and upper confidence bounds `F- = cost - zeta psi` and
//! `F+ = cost + zeta psi`, and at most one particle per iteration is sent to
//! the true objective and added to the training set.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::optimize::{argmin, pso_move, uniform_point, HistoryRecord, OptimizerConfig, RunResult};
use crate::problem::{Evaluator, Problem};
use crate::rng::{stream_rng, Stream};
use crate::sampling::{evaluate_plan, lhs};
use crate::surrogate::{fit_ok, OkModel, ThetaSpec, TrainingSet};

pub const DEFAULT_ZETA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenancedPoint {
    pub position: Vec<f64>,
    /// True cost if simulated, prediction otherwise.
    pub cost: f64,
    /// Kriging standard deviation; zero for simulated points.
    pub confidence: f64,
    pub simulated: bool,
}

impl ProvenancedPoint {
    pub fn simulated(position: Vec<f64>, cost: f64) -> Self {
        Self {
            position,
            cost,
            confidence: 0.0,
            simulated: true,
        }
    }

    pub fn predicted(position: Vec<f64>, cost: f64, confidence: f64) -> Self {
        Self {
            position,
            cost,
            confidence,
            simulated: false,
        }
    }
}

pub fn lcb(point: &ProvenancedPoint, zeta: f64) -> f64 {
    if point.simulated {
        point.cost
    } else {
        point.cost - zeta * point.confidence
    }
}

pub fn ucb(point: &ProvenancedPoint, zeta: f64) -> f64 {
    if point.simulated {
        point.cost
    } else {
        point.cost + zeta * point.confidence
    }
}

/// Whether `current` replaces `prev` as a personal best.
pub fn personal_best_wins(current: &ProvenancedPoint, prev: &ProvenancedPoint, zeta: f64) -> bool {
    match (prev.simulated, current.simulated) {
        (true, true) => current.cost < prev.cost,
        (true, false) => ucb(current, zeta) < prev.cost,
        (false, true) => current.cost < ucb(prev, zeta),
        (false, false) => lcb(current, zeta) < lcb(prev, zeta),
    }
}

pub fn update_personal_best(current: &ProvenancedPoint, prev: &ProvenancedPoint, zeta: f64) -> ProvenancedPoint {
    if personal_best_wins(current, prev, zeta) {
        current.clone()
    } else {
        prev.clone()
    }
}

/// Index of the challenger that replaces `prev` as global best, if any.
pub fn global_best_challenger(candidates: &[ProvenancedPoint], prev: &ProvenancedPoint, zeta: f64) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    if prev.simulated {
        let scores: Vec<f64> = candidates.iter().map(|c| ucb(c, zeta)).collect();
        let b = argmin(&scores);
        (scores[b] < prev.cost).then_some(b)
    } else {
        let scores: Vec<f64> = candidates.iter().map(|c| lcb(c, zeta)).collect();
        let b = argmin(&scores);
        (scores[b] < lcb(prev, zeta)).then_some(b)
    }
}

pub fn update_global_best(candidates: &[ProvenancedPoint], prev: &ProvenancedPoint, zeta: f64) -> ProvenancedPoint {
    match global_best_challenger(candidates, prev, zeta) {
        Some(b) => candidates[b].clone(),
        None => prev.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsbdConfig {
    pub s0: usize,
    pub s: usize,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Stride of the diagnostic control points; `None` disables them.
    #[serde(default)]
    pub control_stride: Option<usize>,
}

fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

impl CsbdConfig {
    pub fn new(s0: usize, s: usize) -> Self {
        Self {
            s0,
            s,
            zeta: DEFAULT_ZETA,
            control_stride: None,
        }
    }

    pub fn validate(&self, config: &OptimizerConfig) -> Result<()> {
        if self.s0 < 2 {
            return Err(SbdError::InvalidArgument(format!("S0 must be at least 2, got {}", self.s0)));
        }
        if self.s < self.s0 {
            return Err(SbdError::InvalidArgument(format!("S = {} is below S0 = {}", self.s, self.s0)));
        }
        if self.s > config.agents * config.iterations + self.s0 {
            return Err(SbdError::InvalidArgument(format!(
                "S = {} exceeds P x I + S0 = {}",
                self.s,
                config.agents * config.iterations + self.s0
            )));
        }
        if !(1.0..=3.0).contains(&self.zeta) {
            return Err(SbdError::InvalidArgument(format!("zeta must lie in [1, 3], got {}", self.zeta)));
        }
        if self.control_stride == Some(0) {
            return Err(SbdError::InvalidArgument("control stride must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration state beyond the plain history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsbdRecord {
    pub iteration: usize,
    pub simulated_this_iter: bool,
    pub training_size: usize,
    pub best_train_cost: f64,
    /// Cost of the global best (prediction with the current model when
    /// predicted).
    pub global_cost: f64,
    pub global_confidence: f64,
    pub global_simulated: bool,
}

/// Diagnostic pairing of the model's view of the global best with its true
/// cost. Evaluated outside the budget ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub iteration: usize,
    pub predicted: f64,
    pub confidence: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbdResult {
    pub run: RunResult,
    pub records: Vec<CsbdRecord>,
    pub control_points: Vec<ControlPoint>,
    pub refit_failures: usize,
    /// Iterations where the most promising particle was not simulated
    /// because its lower bound exceeded the best training cost.
    pub guard_skips: usize,
    /// The reported design was confirmed with the reserved evaluation.
    pub final_reevaluated: bool,
}

impl CsbdResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from(
            "iteration,best_cost,true_evals_so_far,simulated_this_iter,training_size,best_train_cost,global_cost,global_confidence,global_simulated\n",
        );
        for (h, r) in self.run.history.iter().zip(&self.records) {
            let _ = writeln!(
                out,
                "{},{:?},{},{},{},{:?},{:?},{:?},{}",
                h.iteration,
                h.best_cost,
                h.true_evals_so_far,
                u8::from(r.simulated_this_iter),
                r.training_size,
                r.best_train_cost,
                r.global_cost,
                r.global_confidence,
                u8::from(r.global_simulated)
            );
        }
        out
    }

    pub fn control_csv(&self) -> String {
        let mut out = String::from("iteration,predicted,confidence,actual\n");
        for c in &self.control_points {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", c.iteration, c.predicted, c.confidence, c.actual);
        }
        out
    }
}

struct Model {
    ok: OkModel,
    data: TrainingSet,
}

impl Model {
    /// Score a position: exact training inputs are simulated points,
    /// everything else is a prediction of the current model.
    fn score(&self, x: &[f64]) -> ProvenancedPoint {
        if let Some(i) = self.data.inputs().iter().position(|s| s.as_slice() == x) {
            return ProvenancedPoint::simulated(x.to_vec(), self.data.targets()[i]);
        }
        let (value, sd) = self.ok.value_and_sd(x);
        ProvenancedPoint::predicted(x.to_vec(), value, sd)
    }

    fn rescore(&self, point: &mut ProvenancedPoint) {
        if !point.simulated {
            *point = self.score(&point.position);
        }
    }
}

fn record(iteration: usize, simulated: bool, data: &TrainingSet, global: &ProvenancedPoint) -> CsbdRecord {
    CsbdRecord {
        iteration,
        simulated_this_iter: simulated,
        training_size: data.len(),
        best_train_cost: data.best_cost().unwrap_or(f64::INFINITY),
        global_cost: global.cost,
        global_confidence: global.confidence,
        global_simulated: global.simulated,
    }
}

/// Run PSO-OK/C on `problem` with at most `csbd.s` true evaluations, the
/// first `csbd.s0` of them on a Latin hypercube design.
///
/// One evaluation is held back to confirm the final global best when it is
/// still a prediction; if no budget remains for it (`s == s0`), the best
/// training sample is reported instead.
pub fn pso_ok_c_run(problem: &Problem, config: &OptimizerConfig, csbd: &CsbdConfig) -> Result<CsbdResult> {
    config.validate()?;
    csbd.validate(config)?;
    let zeta = csbd.zeta;
    let seed = config.seed;
    let space = problem.space().clone();
    let agents = config.agents;
    let mut log = Vec::new();

    let plan = lhs(&space, csbd.s0, seed)?;
    let data = evaluate_plan(problem, &plan)?;
    let mut used = plan.len();
    let ok = fit_ok(&data, &ThetaSpec::Auto)?;
    let mut model = Model { ok, data };
    let mut refit_failures = 0;
    let mut guard_skips = 0;
    // one evaluation is held back for the final design
    let rl_budget = csbd.s.saturating_sub(1).max(csbd.s0);

    let mut rng = stream_rng(seed, Stream::Swarm, 0);
    let mut positions: Vec<Vec<f64>> = (0..agents).map(|_| uniform_point(&space, &mut rng)).collect();
    let mut velocities = vec![vec![0.0; space.dims()]; agents];
    let mut current: Vec<ProvenancedPoint> = positions.par_iter().map(|x| model.score(x)).collect();
    let mut personal = current.clone();
    let lower: Vec<f64> = personal.iter().map(|p| lcb(p, zeta)).collect();
    let mut global = personal[argmin(&lower)].clone();
    let initial_best = global.position.clone();

    let mut history = vec![HistoryRecord {
        iteration: 0,
        best_cost: model.data.best_cost().unwrap_or(f64::INFINITY),
        true_evals_so_far: used,
    }];
    let mut records = vec![record(0, false, &model.data, &global)];
    let mut control_points = Vec::new();
    let control = |iteration: usize, global: &ProvenancedPoint, control_points: &mut Vec<ControlPoint>| {
        if let Some(stride) = csbd.control_stride {
            if iteration.is_multiple_of(stride) || iteration == config.iterations {
                control_points.push(ControlPoint {
                    iteration,
                    predicted: global.cost,
                    confidence: global.confidence,
                    actual: problem.evaluate_untracked(&global.position),
                });
            }
        }
    };
    control(0, &global, &mut control_points);

    for iteration in 1..=config.iterations {
        let personal_positions: Vec<Vec<f64>> = personal.iter().map(|p| p.position.clone()).collect();
        pso_move(
            &mut positions,
            &mut velocities,
            &personal_positions,
            &global.position,
            &space,
            &config.pso,
            &mut rng,
        );
        current = positions.par_iter().map(|x| model.score(x)).collect();

        let mut simulated = false;
        if used < rl_budget {
            let lower: Vec<f64> = current.iter().map(|p| lcb(p, zeta)).collect();
            let star = argmin(&lower);
            let best_train = model.data.best_cost().unwrap_or(f64::INFINITY);
            if current[star].simulated {
                // already in the database: nothing to learn
            } else if lower[star] <= best_train {
                let x = current[star].position.clone();
                let cost = problem.evaluate(&x);
                used += 1;
                simulated = true;
                if cost.is_finite() {
                    model.data.push(x.clone(), cost)?;
                    match fit_ok(&model.data, &ThetaSpec::Auto) {
                        Ok(ok) => model.ok = ok,
                        Err(err) => {
                            refit_failures += 1;
                            log.push(format!("iteration {iteration}: refit failed ({err}); keeping previous model"));
                        }
                    }
                } else {
                    log.push(format!("iteration {iteration}: non-finite true cost, sample discarded"));
                }
                current[star] = ProvenancedPoint::simulated(x, if cost.is_finite() { cost } else { f64::INFINITY });
                current.par_iter_mut().for_each(|p| model.rescore(p));
                personal.par_iter_mut().for_each(|p| model.rescore(p));
                model.rescore(&mut global);
            } else {
                guard_skips += 1;
            }
        }

        for (prev, cur) in personal.iter_mut().zip(&current) {
            if personal_best_wins(cur, prev, zeta) {
                *prev = cur.clone();
            }
        }
        if let Some(b) = global_best_challenger(&personal, &global, zeta) {
            if global.simulated && !personal[b].simulated {
                log.push(format!("iteration {iteration}: simulated global best replaced by a prediction"));
            }
            global = personal[b].clone();
        }

        history.push(HistoryRecord {
            iteration,
            best_cost: model.data.best_cost().unwrap_or(f64::INFINITY),
            true_evals_so_far: used,
        });
        records.push(record(iteration, simulated, &model.data, &global));
        control(iteration, &global, &mut control_points);
    }

    if guard_skips > 0 {
        log.push(format!(
            "{guard_skips} iterations skipped simulation: min lower bound above the best training cost"
        ));
    }

    let mut final_reevaluated = false;
    let (best, best_cost, predicted_cost) = if global.simulated {
        (global.position.clone(), global.cost, None)
    } else if used < csbd.s {
        let cost = problem.evaluate(&global.position);
        used += 1;
        final_reevaluated = true;
        (global.position.clone(), cost, Some(global.cost))
    } else {
        let i = model.data.best_index().expect("non-empty training set");
        log.push("no budget left to confirm the predicted global best; reporting the best training sample".into());
        (model.data.inputs()[i].clone(), model.data.targets()[i], Some(global.cost))
    };

    let run = RunResult {
        best,
        best_cost,
        predicted_cost,
        history,
        true_evals_used: used,
        rng_seed: seed,
        initial_best,
        non_finite_evals: 0,
        log,
    };
    Ok(CsbdResult {
        run,
        records,
        control_points,
        refit_failures,
        guard_skips,
        final_reevaluated,
    })
}
