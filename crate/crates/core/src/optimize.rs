//! Population-based optimizers (particle swarm, differential evolution) over
//! any [`Evaluator`], and the bare surrogate loop that fits a model once and
//! optimizes it in place of the true objective.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};
use crate::problem::{Evaluator, Problem, SearchSpace};
use crate::rng::{stream_rng, Stream};
use crate::sampling::{evaluate_plan, lhs};
use crate::surrogate::{ModelSpec, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity cap as a fraction of each dimension's range.
    pub vmax_fraction: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            inertia: 0.4,
            cognitive: 2.0,
            social: 2.0,
            vmax_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DeStrategy {
    #[default]
    #[serde(rename = "rand/1/bin")]
    RandOneBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeParams {
    pub scale: f64,
    pub crossover: f64,
    pub strategy: DeStrategy,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            scale: 0.5,
            crossover: 0.9,
            strategy: DeStrategy::RandOneBin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub agents: usize,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(default)]
    pub de: DeParams,
}

impl OptimizerConfig {
    pub fn new(agents: usize, iterations: usize, seed: u64) -> Self {
        Self {
            agents,
            iterations,
            seed,
            pso: PsoParams::default(),
            de: DeParams::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SbdError::InvalidArgument(what.to_string()));
        if self.agents < 2 {
            return bad("at least two agents are required");
        }
        if self.iterations < 1 {
            return bad("at least one iteration is required");
        }
        let p = &self.pso;
        if !(p.inertia > 0.0 && p.inertia < 1.0) {
            return bad("PSO inertia must lie in (0, 1)");
        }
        if !(p.cognitive > 0.0 && p.social > 0.0) {
            return bad("PSO acceleration coefficients must be positive");
        }
        if !(p.vmax_fraction > 0.0) {
            return bad("PSO velocity cap must be positive");
        }
        if !(self.de.crossover > 0.0 && self.de.crossover <= 1.0) {
            return bad("DE crossover rate must lie in (0, 1]");
        }
        // F = 0 is allowed as a degenerate setting
        if !(self.de.scale >= 0.0) {
            return bad("DE scale factor must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Pso,
    De,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Pso => "pso",
            OptimizerKind::De => "de",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = SbdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(OptimizerKind::Pso),
            "de" => Ok(OptimizerKind::De),
            other => Err(SbdError::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub best_cost: f64,
    pub true_evals_so_far: usize,
}

/// Outcome of one optimization run.
///
/// For runs on the true objective `history` is the running best and
/// `best_cost` its last entry. For surrogate-driven runs `history` tracks
/// the model's best while `best_cost` is the true cost of `best`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Model prediction at `best`, for surrogate-driven runs.
    pub predicted_cost: Option<f64>,
    pub history: Vec<HistoryRecord>,
    pub true_evals_used: usize,
    pub rng_seed: u64,
    /// Best design of the initial population (iteration 0).
    pub initial_best: Vec<f64>,
    pub non_finite_evals: usize,
    pub log: Vec<String>,
}

impl RunResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,best_cost,true_evals_so_far\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{:?},{}", h.iteration, h.best_cost, h.true_evals_so_far);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SbdError::Parse(e.to_string()))
    }
}

fn check_space(space: &SearchSpace, config: &OptimizerConfig) -> Result<()> {
    config.validate()?;
    if space.dims() == 0 {
        return Err(SbdError::InvalidSpace("zero-dimensional space".into()));
    }
    Ok(())
}

pub(crate) fn uniform_point(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    space
        .lower()
        .iter()
        .zip(space.upper())
        .map(|(lo, hi)| if hi > lo { rng.gen_range(*lo..=*hi) } else { *lo })
        .collect()
}

/// Evaluate a batch, mapping non-finite costs to `+inf` and counting them.
fn scored<E: Evaluator + ?Sized>(evaluator: &E, xs: &[Vec<f64>], non_finite: &mut usize) -> Vec<f64> {
    evaluator
        .evaluate_batch(xs)
        .into_iter()
        .map(|c| {
            if c.is_finite() {
                c
            } else {
                *non_finite += 1;
                f64::INFINITY
            }
        })
        .collect()
}

/// Index of the smallest value; the lowest index wins ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// One synchronous PSO move of every particle toward its personal best and
/// the global best. Clamped components have their velocity zeroed.
pub(crate) fn pso_move(
    positions: &mut [Vec<f64>],
    velocities: &mut [Vec<f64>],
    personal: &[Vec<f64>],
    global: &[f64],
    space: &SearchSpace,
    params: &PsoParams,
    rng: &mut ChaCha8Rng,
) {
    for p in 0..positions.len() {
        for k in 0..space.dims() {
            let vmax = params.vmax_fraction * space.width(k);
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let x = positions[p][k];
            let mut v = params.inertia * velocities[p][k]
                + params.cognitive * r1 * (personal[p][k] - x)
                + params.social * r2 * (global[k] - x);
            v = v.clamp(-vmax, vmax);
            let mut next = x + v;
            if next < space.lower()[k] {
                next = space.lower()[k];
                v = 0.0;
            } else if next > space.upper()[k] {
                next = space.upper()[k];
                v = 0.0;
            }
            positions[p][k] = next;
            velocities[p][k] = v;
        }
    }
}

pub fn pso_run<E: Evaluator + ?Sized>(evaluator: &E, space: &SearchSpace, config: &OptimizerConfig) -> Result<RunResult> {
    check_space(space, config)?;
    let agents = config.agents;
    let mut rng = stream_rng(config.seed, Stream::Optimizer, 0);
    let mut positions: Vec<Vec<f64>> = (0..agents).map(|_| uniform_point(space, &mut rng)).collect();
    let mut velocities = vec![vec![0.0; space.dims()]; agents];
    let mut non_finite = 0;
    let costs = scored(evaluator, &positions, &mut non_finite);
    let mut personal = positions.clone();
    let mut personal_cost = costs;
    let mut g = argmin(&personal_cost);
    let mut global = personal[g].clone();
    let mut global_cost = personal_cost[g];
    let initial_best = global.clone();
    let mut evals = agents;
    let mut history = vec![HistoryRecord {
        iteration: 0,
        best_cost: global_cost,
        true_evals_so_far: evals,
    }];

    for iteration in 1..=config.iterations {
        pso_move(&mut positions, &mut velocities, &personal, &global, space, &config.pso, &mut rng);
        let costs = scored(evaluator, &positions, &mut non_finite);
        evals += agents;
        for p in 0..agents {
            if costs[p] < personal_cost[p] {
                personal[p].clone_from(&positions[p]);
                personal_cost[p] = costs[p];
            }
        }
        g = argmin(&personal_cost);
        if personal_cost[g] < global_cost {
            global.clone_from(&personal[g]);
            global_cost = personal_cost[g];
        }
        history.push(HistoryRecord {
            iteration,
            best_cost: global_cost,
            true_evals_so_far: evals,
        });
    }
    Ok(finish(global, global_cost, history, evals, config.seed, initial_best, non_finite))
}

fn finish(
    best: Vec<f64>,
    best_cost: f64,
    history: Vec<HistoryRecord>,
    evals: usize,
    seed: u64,
    initial_best: Vec<f64>,
    non_finite: usize,
) -> RunResult {
    let mut log = Vec::new();
    if non_finite > 0 {
        log.push(format!("{non_finite} non-finite evaluations scored as +inf"));
    }
    RunResult {
        best,
        best_cost,
        predicted_cost: None,
        history,
        true_evals_used: evals,
        rng_seed: seed,
        initial_best,
        non_finite_evals: non_finite,
        log,
    }
}

/// Three donor indices different from `i`; distinct from each other when
/// the population allows it.
fn donors(i: usize, agents: usize, rng: &mut ChaCha8Rng) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    let distinct = agents >= 4;
    for slot in 0..3 {
        loop {
            let r = rng.gen_range(0..agents);
            if r != i && !(distinct && picked[..slot].contains(&r)) {
                picked[slot] = r;
                break;
            }
        }
    }
    picked
}

pub fn de_run<E: Evaluator + ?Sized>(evaluator: &E, space: &SearchSpace, config: &OptimizerConfig) -> Result<RunResult> {
    check_space(space, config)?;
    let agents = config.agents;
    let dims = space.dims();
    let DeParams { scale, crossover, .. } = config.de;
    let mut rng = stream_rng(config.seed, Stream::Optimizer, 0);
    let mut population: Vec<Vec<f64>> = (0..agents).map(|_| uniform_point(space, &mut rng)).collect();
    let mut non_finite = 0;
    let mut costs = scored(evaluator, &population, &mut non_finite);
    let mut b = argmin(&costs);
    let mut best = population[b].clone();
    let mut best_cost = costs[b];
    let initial_best = best.clone();
    let mut evals = agents;
    let mut history = vec![HistoryRecord {
        iteration: 0,
        best_cost,
        true_evals_so_far: evals,
    }];

    for iteration in 1..=config.iterations {
        let trials: Vec<Vec<f64>> = (0..agents)
            .map(|i| {
                let [r1, r2, r3] = donors(i, agents, &mut rng);
                let forced = rng.gen_range(0..dims);
                (0..dims)
                    .map(|k| {
                        let cross: f64 = rng.gen();
                        let v = if k == forced || cross < crossover {
                            population[r1][k] + scale * (population[r2][k] - population[r3][k])
                        } else {
                            population[i][k]
                        };
                        v.clamp(space.lower()[k], space.upper()[k])
                    })
                    .collect()
            })
            .collect();
        let trial_costs = scored(evaluator, &trials, &mut non_finite);
        evals += agents;
        for (i, (trial, cost)) in trials.into_iter().zip(trial_costs).enumerate() {
            if cost <= costs[i] {
                population[i] = trial;
                costs[i] = cost;
            }
        }
        b = argmin(&costs);
        if costs[b] < best_cost {
            best.clone_from(&population[b]);
            best_cost = costs[b];
        }
        history.push(HistoryRecord {
            iteration,
            best_cost,
            true_evals_so_far: evals,
        });
    }
    Ok(finish(best, best_cost, history, evals, config.seed, initial_best, non_finite))
}

pub fn run_optimizer<E: Evaluator + ?Sized>(
    kind: OptimizerKind,
    evaluator: &E,
    space: &SearchSpace,
    config: &OptimizerConfig,
) -> Result<RunResult> {
    match kind {
        OptimizerKind::Pso => pso_run(evaluator, space, config),
        OptimizerKind::De => de_run(evaluator, space, config),
    }
}

/// Fit `model` to `data` once, optimize the surrogate alone, then spend one
/// true evaluation on the returned design.
pub fn optimize_surrogate(
    problem: &Problem,
    data: &TrainingSet,
    model: &ModelSpec,
    opt: OptimizerKind,
    config: &OptimizerConfig,
) -> Result<RunResult> {
    let surrogate = model.fit(data)?;
    let mut run = run_optimizer(opt, &surrogate, problem.space(), config)?;
    let used = data.len();
    for h in &mut run.history {
        h.true_evals_so_far = used;
    }
    run.predicted_cost = Some(run.best_cost);
    run.best_cost = problem.evaluate(&run.best);
    run.true_evals_used = used + 1;
    Ok(run)
}

/// Bare surrogate-based design: `s` Latin hypercube samples, one fit, one
/// optimization on the model and one confirming true evaluation
/// (`s + 1` true evaluations).
pub fn bare_sbd(
    problem: &Problem,
    model: &ModelSpec,
    s: usize,
    opt: OptimizerKind,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<RunResult> {
    if s < 2 {
        return Err(SbdError::InvalidArgument(format!("at least two training samples are required, got {s}")));
    }
    config.validate()?;
    let plan = lhs(problem.space(), s, seed)?;
    let data = evaluate_plan(problem, &plan)?;
    optimize_surrogate(problem, &data, model, opt, &config.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::ModelKind;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    fn sphere_median(kind: OptimizerKind) -> f64 {
        let space = SearchSpace::uniform(2, -5.0, 5.0).unwrap();
        median(
            (0..20)
                .map(|seed| run_optimizer(kind, &sphere, &space, &OptimizerConfig::new(10, 50, seed)).unwrap().best_cost)
                .collect(),
        )
    }

    #[test]
    fn pso_solves_sphere() {
        assert!(sphere_median(OptimizerKind::Pso) < 1e-2);
    }

    #[test]
    fn de_solves_sphere() {
        assert!(sphere_median(OptimizerKind::De) < 1e-2);
    }

    #[test]
    fn evaluation_count_and_bounds() {
        for kind in [OptimizerKind::Pso, OptimizerKind::De] {
            let space = SearchSpace::new(vec![-1.0, 2.0, 0.0], vec![1.0, 3.0, 0.5]).unwrap();
            let inner = space.clone();
            let problem = Problem::new(space.clone(), move |x: &[f64]| {
                assert!(inner.contains(x));
                x.iter().map(|v| (v - 0.7).powi(2)).sum()
            });
            let config = OptimizerConfig::new(7, 13, 3);
            let run = run_optimizer(kind, &problem, &space, &config).unwrap();
            assert_eq!(problem.eval_count(), 7 + 7 * 13);
            assert_eq!(run.true_evals_used, problem.eval_count());
            assert_eq!(run.history.len(), 14);
            for w in run.history.windows(2) {
                assert!(w[1].best_cost <= w[0].best_cost);
            }
            assert_eq!(run.best_cost, run.history.last().unwrap().best_cost);
            assert_eq!(problem.evaluate_untracked(&run.best), run.best_cost);
            let ledger = problem.ledger();
            assert!(ledger.iter().any(|e| e.x == run.best && e.cost == run.best_cost));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let space = SearchSpace::uniform(3, -2.0, 2.0).unwrap();
        for kind in [OptimizerKind::Pso, OptimizerKind::De] {
            let config = OptimizerConfig::new(6, 20, 42);
            let a = run_optimizer(kind, &sphere, &space, &config).unwrap();
            let b = run_optimizer(kind, &sphere, &space, &config).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.history_csv(), b.history_csv());
            let c = run_optimizer(kind, &sphere, &space, &config.with_seed(43)).unwrap();
            assert_ne!(a.best, c.best);
        }
    }

    #[test]
    fn degenerate_de_parameters_complete() {
        let space = SearchSpace::uniform(2, -1.0, 1.0).unwrap();
        let mut config = OptimizerConfig::new(5, 10, 1);
        config.de.crossover = 1.0;
        config.de.scale = 0.0;
        let run = de_run(&sphere, &space, &config).unwrap();
        // trials are copies of existing members, so the best can only come
        // from the initial population
        assert_eq!(run.best_cost, run.history[0].best_cost);
    }

    #[test]
    fn tiny_population_de() {
        let space = SearchSpace::uniform(2, -1.0, 1.0).unwrap();
        let run = de_run(&sphere, &space, &OptimizerConfig::new(2, 5, 1)).unwrap();
        assert_eq!(run.history.len(), 6);
    }

    #[test]
    fn non_finite_costs_are_flagged() {
        let space = SearchSpace::uniform(1, -1.0, 1.0).unwrap();
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { -x[0] };
        let run = pso_run(&f, &space, &OptimizerConfig::new(4, 5, 9)).unwrap();
        assert!(run.best_cost.is_finite());
        assert!(run.non_finite_evals > 0);
        assert_eq!(run.log.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::new(1, 5, 0);
        assert!(c.validate().is_err());
        c.agents = 2;
        assert!(c.validate().is_ok());
        c.pso.inertia = 1.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::new(2, 0, 0);
        assert!(c.validate().is_err());
        c.iterations = 1;
        c.de.crossover = 0.0;
        assert!(c.validate().is_err());
        let json = r#"{"agents": 10, "iterations": 200, "pso": {"inertia": 0.5}}"#;
        let parsed: OptimizerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.pso.inertia, 0.5);
        assert_eq!(parsed.pso.social, 2.0);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"agents": 2, "iterations": 1, "x": 1}"#).is_err());
    }

    #[test]
    fn bare_sbd_accounting() {
        let space = SearchSpace::uniform(2, -5.0, 5.0).unwrap();
        let problem = Problem::new(space, sphere);
        let config = OptimizerConfig::new(10, 30, 0);
        for kind in ModelKind::ALL {
            let fresh = problem.fresh();
            let run = bare_sbd(&fresh, &kind.default_spec(), 20, OptimizerKind::Pso, &config, 5).unwrap();
            assert_eq!(run.true_evals_used, 21);
            assert_eq!(fresh.eval_count(), 21);
            assert_eq!(run.best_cost, sphere(&run.best));
            assert!(run.predicted_cost.is_some());
            assert!(run.history.iter().all(|h| h.true_evals_so_far == 20));
        }
        assert!(bare_sbd(&problem, &ModelKind::Ok.default_spec(), 1, OptimizerKind::De, &config, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn runs_stay_in_box_and_spend_full_budget(
                dims in 1usize..4,
                agents in 2usize..8,
                iterations in 1usize..10,
                seed in any::<u64>(),
                de in any::<bool>(),
            ) {
                let space = SearchSpace::uniform(dims, -2.0, 3.0).unwrap();
                let kind = if de { OptimizerKind::De } else { OptimizerKind::Pso };
                let run = run_optimizer(kind, &sphere, &space, &OptimizerConfig::new(agents, iterations, seed)).unwrap();
                prop_assert!(space.contains(&run.best));
                prop_assert_eq!(run.true_evals_used, agents * (iterations + 1));
                prop_assert_eq!(run.history.len(), iterations + 1);
                prop_assert_eq!(run.best_cost, sphere(&run.best));
                for pair in run.history.windows(2) {
                    prop_assert!(pair[1].best_cost <= pair[0].best_cost);
                }
            }
        }
    }
}
