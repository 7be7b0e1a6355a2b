//! Batch experiment driver behind the `sbd` binary: strict JSON configs,
//! seed sweeps over algorithm arms, per-seed result files and a summary
//! table, plus functional cuts between two designs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{tma_directivity_trace, tma_problem, Benchmark, TmaConfig, DEFAULT_TIME_GRID};
use crate::confidence::{pso_ok_c_run, CsbdConfig, DEFAULT_ZETA};
use crate::error::{Result, SbdError};
use crate::optimize::{bare_sbd, optimize_surrogate, run_optimizer, OptimizerConfig, OptimizerKind, RunResult};
use crate::problem::{cut_grid, functional_cut, Problem};
use crate::rng::{derive_seed, Stream};
use crate::sampling::{evaluate_plan, lhs, osf_expand, OsfConfig};
use crate::surrogate::{ModelSpec, TrainingSet};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "SBD_WORKERS";

fn config_error(field: &str, message: impl Into<String>) -> SbdError {
    SbdError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Benchmark {
        name: String,
        dims: usize,
    },
    Tma {
        n_elements: usize,
        /// Dolph-Chebyshev side-lobe level used when `durations` is absent.
        #[serde(default)]
        sll_db: Option<f64>,
        #[serde(default)]
        durations: Option<Vec<f64>>,
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        spacing_wavelengths: Option<f64>,
        #[serde(default)]
        time_grid: Option<usize>,
    },
}

impl ProblemSpec {
    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Benchmark { name, dims } => format!("{name}-{dims}"),
            ProblemSpec::Tma { n_elements, .. } => format!("tma-{n_elements}"),
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            ProblemSpec::Benchmark { dims, .. } => *dims,
            ProblemSpec::Tma { n_elements, .. } => n_elements / 2,
        }
    }

    pub fn tma_config(&self) -> Result<Option<TmaConfig>> {
        let ProblemSpec::Tma {
            n_elements,
            sll_db,
            durations,
            period,
            spacing_wavelengths,
            time_grid,
        } = self
        else {
            return Ok(None);
        };
        let mut cfg = match durations {
            Some(d) => TmaConfig {
                n_elements: *n_elements,
                period: 10e-6,
                durations: d.clone(),
                spacing_wavelengths: 0.5,
                time_grid: DEFAULT_TIME_GRID,
            },
            None => TmaConfig::chebyshev(*n_elements, sll_db.unwrap_or(-30.0))
                .map_err(|e| config_error("problem", e.to_string()))?,
        };
        if let Some(p) = period {
            cfg.period = *p;
        }
        if let Some(s) = spacing_wavelengths {
            cfg.spacing_wavelengths = *s;
        }
        if let Some(g) = time_grid {
            cfg.time_grid = *g;
        }
        cfg.validate().map_err(|e| config_error("problem", e.to_string()))?;
        Ok(Some(cfg))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemSpec::Benchmark { name, dims } => {
                name.parse::<Benchmark>()
                    .map_err(|e| config_error("problem.name", e.to_string()))?;
                if *dims == 0 {
                    return Err(config_error("problem.dims", "must be at least 1"));
                }
                Ok(())
            }
            ProblemSpec::Tma { .. } => self.tma_config().map(|_| ()),
        }
    }

    /// A fresh problem instance with an empty evaluation ledger.
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Benchmark { name, dims } => {
                let bench: Benchmark = name.parse()?;
                Ok(Problem::new(bench.space(*dims)?, move |x: &[f64]| bench.evaluate(x)))
            }
            ProblemSpec::Tma { .. } => tma_problem(self.tma_config()?.expect("tma spec")),
        }
    }
}

/// One value or a sweep of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    One(usize),
    Many(Vec<usize>),
}

impl Sweep {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Sweep::One(v) => vec![*v],
            Sweep::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArmSpec {
    StdPso {
        #[serde(default)]
        label: Option<String>,
    },
    StdDe {
        #[serde(default)]
        label: Option<String>,
    },
    BareSbd {
        #[serde(default)]
        label: Option<String>,
        model: ModelSpec,
        optimizer: OptimizerKind,
        /// Training-set sizes; alternatively `s_per_dim` (multiplied by K).
        #[serde(default)]
        s: Option<Sweep>,
        #[serde(default)]
        s_per_dim: Option<Sweep>,
    },
    OsfThenBare {
        #[serde(default)]
        label: Option<String>,
        model: ModelSpec,
        optimizer: OptimizerKind,
        s0: usize,
        s: Sweep,
        phi_th: f64,
        #[serde(default)]
        candidates: Option<usize>,
    },
    PsoOkC {
        #[serde(default)]
        label: Option<String>,
        s0: usize,
        s: Sweep,
        #[serde(default)]
        zeta: Option<f64>,
        #[serde(default)]
        control_stride: Option<usize>,
    },
}

/// Seeds given explicitly, or `count` seeds split from a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Split {
        count: usize,
        #[serde(default)]
        master: u64,
    },
}

impl SeedSpec {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Split { count, master } => {
                (0..*count as u64).map(|r| derive_seed(*master, Stream::Seeds, r)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemSpec>,
    pub arms: Vec<ArmSpec>,
    pub budget: OptimizerConfig,
    pub seeds: SeedSpec,
    pub output: PathBuf,
    /// Label of the arm that the quality index is measured against; the
    /// first `std-pso` arm by default.
    #[serde(default)]
    pub reference_arm: Option<String>,
}

/// A fully expanded arm with a concrete budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Algorithm {
    Standard(OptimizerKind),
    Bare {
        model: ModelSpec,
        optimizer: OptimizerKind,
        s: usize,
    },
    OsfThenBare {
        model: ModelSpec,
        optimizer: OptimizerKind,
        s0: usize,
        s: usize,
        phi_th: f64,
        candidates: Option<usize>,
    },
    Confidence(CsbdConfig),
}

impl Algorithm {
    fn tag(&self) -> &'static str {
        match self {
            Algorithm::Standard(OptimizerKind::Pso) => "std-pso",
            Algorithm::Standard(OptimizerKind::De) => "std-de",
            Algorithm::Bare { .. } => "bare-sbd",
            Algorithm::OsfThenBare { .. } => "osf-then-bare",
            Algorithm::Confidence(_) => "pso-ok-c",
        }
    }

    fn default_label(&self) -> String {
        match self {
            Algorithm::Standard(_) => self.tag().to_string(),
            Algorithm::Bare { model, optimizer, s } => {
                format!("bare-{}-{}-s{s}", model.kind().name(), optimizer.name())
            }
            Algorithm::OsfThenBare { model, optimizer, s, .. } => {
                format!("osf-{}-{}-s{s}", model.kind().name(), optimizer.name())
            }
            Algorithm::Confidence(c) => format!("pso-ok-c-s{}", c.s),
        }
    }

    fn model_name(&self) -> &'static str {
        match self {
            Algorithm::Standard(_) => "",
            Algorithm::Bare { model, .. } | Algorithm::OsfThenBare { model, .. } => model.kind().name(),
            Algorithm::Confidence(_) => "ok",
        }
    }

    fn optimizer_name(&self) -> &'static str {
        match self {
            Algorithm::Standard(k) | Algorithm::Bare { optimizer: k, .. } | Algorithm::OsfThenBare { optimizer: k, .. } => k.name(),
            Algorithm::Confidence(_) => "pso",
        }
    }

    /// Configured number of true evaluations for surrogate arms.
    fn budget(&self) -> Option<usize> {
        match self {
            Algorithm::Standard(_) => None,
            Algorithm::Bare { s, .. } | Algorithm::OsfThenBare { s, .. } => Some(*s),
            Algorithm::Confidence(c) => Some(c.s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedArm {
    pub label: String,
    pub algorithm: Algorithm,
}

fn suffixed(label: &Option<String>, value: usize, many: bool) -> Option<String> {
    label.as_ref().map(|l| if many { format!("{l}-s{value}") } else { l.clone() })
}

impl ArmSpec {
    pub fn expand(&self, dims: usize) -> Result<Vec<ResolvedArm>> {
        let arm = |label: Option<String>, algorithm: Algorithm| ResolvedArm {
            label: label.unwrap_or_else(|| algorithm.default_label()),
            algorithm,
        };
        Ok(match self {
            ArmSpec::StdPso { label } => vec![arm(label.clone(), Algorithm::Standard(OptimizerKind::Pso))],
            ArmSpec::StdDe { label } => vec![arm(label.clone(), Algorithm::Standard(OptimizerKind::De))],
            ArmSpec::BareSbd {
                label,
                model,
                optimizer,
                s,
                s_per_dim,
            } => {
                let sizes = match (s, s_per_dim) {
                    (Some(s), None) => s.values(),
                    (None, Some(r)) => r.values().into_iter().map(|r| r * dims).collect(),
                    _ => return Err(config_error("arms.s", "bare-sbd needs exactly one of `s` and `s_per_dim`")),
                };
                let many = sizes.len() > 1;
                sizes
                    .into_iter()
                    .map(|s| {
                        arm(
                            suffixed(label, s, many),
                            Algorithm::Bare {
                                model: model.clone(),
                                optimizer: *optimizer,
                                s,
                            },
                        )
                    })
                    .collect()
            }
            ArmSpec::OsfThenBare {
                label,
                model,
                optimizer,
                s0,
                s,
                phi_th,
                candidates,
            } => {
                let many = s.values().len() > 1;
                s.values()
                    .into_iter()
                    .map(|s| {
                        arm(
                            suffixed(label, s, many),
                            Algorithm::OsfThenBare {
                                model: model.clone(),
                                optimizer: *optimizer,
                                s0: *s0,
                                s,
                                phi_th: *phi_th,
                                candidates: *candidates,
                            },
                        )
                    })
                    .collect()
            }
            ArmSpec::PsoOkC {
                label,
                s0,
                s,
                zeta,
                control_stride,
            } => {
                let many = s.values().len() > 1;
                s.values()
                    .into_iter()
                    .map(|s| {
                        arm(
                            suffixed(label, s, many),
                            Algorithm::Confidence(CsbdConfig {
                                s0: *s0,
                                s,
                                zeta: zeta.unwrap_or(DEFAULT_ZETA),
                                control_stride: *control_stride,
                            }),
                        )
                    })
                    .collect()
            }
        })
    }
}

impl ResolvedArm {
    fn validate(&self, budget: &OptimizerConfig) -> Result<()> {
        let field = format!("arms.{}", self.label);
        match &self.algorithm {
            Algorithm::Standard(_) => Ok(()),
            Algorithm::Bare { s, .. } => {
                if *s < 2 {
                    return Err(config_error(&field, format!("S = {s} is below 2")));
                }
                Ok(())
            }
            Algorithm::OsfThenBare { s0, s, phi_th, candidates, .. } => {
                if *s0 < 2 || s < s0 {
                    return Err(config_error(&field, format!("need 2 <= S0 <= S, got S0 = {s0}, S = {s}")));
                }
                if !phi_th.is_finite() {
                    return Err(config_error(&field, "phi_th must be finite"));
                }
                if *candidates == Some(0) {
                    return Err(config_error(&field, "candidates must be positive"));
                }
                Ok(())
            }
            Algorithm::Confidence(c) => c.validate(budget).map_err(|e| config_error(&field, e.to_string())),
        }
    }

    /// Run this arm for one seed on a fresh problem instance.
    pub fn execute(&self, problem: &Problem, budget: &OptimizerConfig, seed: u64) -> Result<ArmOutput> {
        let config = budget.with_seed(seed);
        Ok(match &self.algorithm {
            Algorithm::Standard(kind) => ArmOutput::plain(run_optimizer(*kind, problem, problem.space(), &config)?),
            Algorithm::Bare { model, optimizer, s } => {
                ArmOutput::plain(bare_sbd(problem, model, *s, *optimizer, &config, seed)?)
            }
            Algorithm::OsfThenBare {
                model,
                optimizer,
                s0,
                s,
                phi_th,
                candidates,
            } => {
                let plan = lhs(problem.space(), *s0, seed)?;
                let d0 = evaluate_plan(problem, &plan)?;
                let osf = OsfConfig {
                    s_target: *s,
                    candidates: *candidates,
                    phi_th: *phi_th,
                    seed,
                    model: model.clone(),
                };
                let grown = osf_expand(problem, &d0, &osf)?;
                let mut run = optimize_surrogate(problem, &grown.data, model, *optimizer, &config)?;
                if grown.refit_failures > 0 {
                    run.log.push(format!("{} OSF refits failed", grown.refit_failures));
                }
                ArmOutput::plain(run)
            }
            Algorithm::Confidence(c) => {
                let out = pso_ok_c_run(problem, &config, c)?;
                ArmOutput {
                    history_csv: out.history_csv(),
                    control_csv: c.control_stride.map(|_| out.control_csv()),
                    run: out.run,
                }
            }
        })
    }
}

pub struct ArmOutput {
    pub run: RunResult,
    pub history_csv: String,
    pub control_csv: Option<String>,
}

impl ArmOutput {
    fn plain(run: RunResult) -> Self {
        Self {
            history_csv: run.history_csv(),
            control_csv: None,
            run,
        }
    }
}

/// Parsed and validated experiment, with every arm expanded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Arms per problem, in config order.
    pub arms: Vec<Vec<ResolvedArm>>,
    pub seeds: Vec<u64>,
    pub digest: String,
}

fn digest_of<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut out, b| {
        let _ = write!(out, "{b:02x}");
        out
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        config_error(
            &format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

impl Experiment {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = parse_json(text)?;
        Self::from_config(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error("path", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.budget.validate().map_err(|e| config_error("budget", e.to_string()))?;
        if config.problems.is_empty() {
            return Err(config_error("problems", "at least one problem is required"));
        }
        if config.arms.is_empty() {
            return Err(config_error("arms", "at least one arm is required"));
        }
        let seeds = config.seeds.resolve();
        if seeds.is_empty() {
            return Err(config_error("seeds", "at least one seed is required"));
        }
        let mut arms = Vec::new();
        for problem in &config.problems {
            problem.validate()?;
            let mut expanded = Vec::new();
            for spec in &config.arms {
                for arm in spec.expand(problem.dims())? {
                    arm.validate(&config.budget)?;
                    if expanded.iter().any(|a: &ResolvedArm| a.label == arm.label) {
                        return Err(config_error("arms", format!("duplicate arm label `{}`", arm.label)));
                    }
                    expanded.push(arm);
                }
            }
            if let Some(reference) = &config.reference_arm {
                if !expanded.iter().any(|a| &a.label == reference) {
                    return Err(config_error("reference_arm", format!("no arm labelled `{reference}`")));
                }
            }
            arms.push(expanded);
        }
        let digest = digest_of(&config);
        Ok(Self {
            config,
            arms,
            seeds,
            digest,
        })
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub problem: String,
    pub arm: String,
    pub algorithm: String,
    pub model: String,
    pub optimizer: String,
    pub s: Option<usize>,
    pub runs: usize,
    pub failures: usize,
    pub median_cost: f64,
    pub q1_cost: f64,
    pub q3_cost: f64,
    pub median_true_evals: f64,
    pub time_saving: f64,
    pub delta_phi: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    quantile(&sorted, 0.5)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow], digest: &str) -> String {
    let mut out = String::from(
        "problem,arm,algorithm,model,optimizer,s,runs,failures,median_cost,q1_cost,q3_cost,median_true_evals,time_saving,delta_phi,config_sha256\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            r.problem,
            r.arm,
            r.algorithm,
            r.model,
            r.optimizer,
            r.s.map(|s| s.to_string()).unwrap_or_default(),
            r.runs,
            r.failures,
            r.median_cost,
            r.q1_cost,
            r.q3_cost,
            r.median_true_evals,
            r.time_saving,
            fmt_opt(r.delta_phi),
            digest
        );
    }
    out
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<String>,
    pub summary_path: PathBuf,
}

/// `(P I - S) / (P I)` in percent, with S the median true-evaluation count.
fn saving(budget: &OptimizerConfig, true_evals: f64) -> f64 {
    let full = (budget.agents * budget.iterations) as f64;
    (full - true_evals) * 100.0 / full
}

fn seed_stem(index: usize) -> String {
    format!("seed-{index:03}")
}

/// Run every (problem, arm, seed) triple and write the result files.
/// Seeds of an arm run in parallel; a failing seed is recorded and the
/// others continue.
pub fn run_experiment(experiment: &Experiment) -> Result<ExperimentReport> {
    let cfg = &experiment.config;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (problem_spec, arms) in cfg.problems.iter().zip(&experiment.arms) {
        let problem_label = problem_spec.label();
        let tma = problem_spec.tma_config()?;
        let mut medians: Vec<(String, f64)> = Vec::new();
        let mut problem_rows = Vec::new();
        for arm in arms {
            let dir = cfg.output.join(&problem_label).join(&arm.label);
            let outcomes: Vec<Result<(f64, usize)>> = experiment
                .seeds
                .par_iter()
                .enumerate()
                .map(|(index, &seed)| -> Result<(f64, usize)> {
                    let stem = seed_stem(index);
                    let problem = problem_spec.build()?;
                    match arm.execute(&problem, &cfg.budget, seed) {
                        Ok(out) => {
                            write_atomic(&dir.join(format!("{stem}.json")), &out.run.to_json()?)?;
                            write_atomic(&dir.join(format!("{stem}.csv")), &out.history_csv)?;
                            if let Some(control) = &out.control_csv {
                                write_atomic(&dir.join(format!("{stem}-control.csv")), control)?;
                            }
                            if let Some(tma) = &tma {
                                let wrapped: Vec<f64> = out.run.best.iter().map(|w| w.rem_euclid(1.0)).collect();
                                let trace = tma_directivity_trace(tma, &wrapped, tma.time_grid)?;
                                let mut text = String::from("t,d\n");
                                for (t, d) in trace {
                                    let _ = writeln!(text, "{t:?},{d:?}");
                                }
                                write_atomic(&dir.join(format!("{stem}-trace.csv")), &text)?;
                            }
                            Ok((out.run.best_cost, out.run.true_evals_used))
                        }
                        Err(err) => {
                            write_atomic(&dir.join(format!("{stem}.error.txt")), &format!("{err}\n"))?;
                            Err(err)
                        }
                    }
                })
                .collect();
            let mut costs = Vec::new();
            let mut evals = Vec::new();
            let mut failed = 0;
            for (index, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok((cost, used)) => {
                        costs.push(cost);
                        evals.push(used as f64);
                    }
                    Err(err) => {
                        failed += 1;
                        failures.push(format!("{problem_label}/{}/{}: {err}", arm.label, seed_stem(index)));
                    }
                }
            }
            costs.sort_by(|a, b| a.total_cmp(b));
            let median_evals = median(&evals);
            let row = SummaryRow {
                problem: problem_label.clone(),
                arm: arm.label.clone(),
                algorithm: arm.algorithm.tag().to_string(),
                model: arm.algorithm.model_name().to_string(),
                optimizer: arm.algorithm.optimizer_name().to_string(),
                s: arm.algorithm.budget(),
                runs: costs.len(),
                failures: failed,
                median_cost: quantile(&costs, 0.5),
                q1_cost: quantile(&costs, 0.25),
                q3_cost: quantile(&costs, 0.75),
                median_true_evals: median_evals,
                time_saving: saving(&cfg.budget, median_evals),
                delta_phi: None,
            };
            medians.push((arm.label.clone(), row.median_cost));
            problem_rows.push(row);
        }
        let reference = match &cfg.reference_arm {
            Some(label) => medians.iter().find(|(l, _)| l == label),
            None => arms
                .iter()
                .zip(&medians)
                .find(|(a, _)| a.algorithm == Algorithm::Standard(OptimizerKind::Pso))
                .map(|(_, m)| m),
        };
        if let Some((_, reference)) = reference {
            for row in &mut problem_rows {
                row.delta_phi = Some((row.median_cost - reference) / reference);
            }
        }
        rows.extend(problem_rows);
    }
    let summary_path = cfg.output.join("summary.csv");
    write_atomic(&summary_path, &summary_csv(&rows, &experiment.digest))?;
    write_atomic(
        &cfg.output.join("config.resolved.json"),
        &serde_json::to_string_pretty(&cfg).map_err(|e| SbdError::Parse(e.to_string()))?,
    )?;
    Ok(ExperimentReport {
        rows,
        failures,
        summary_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchors {
    Explicit { start: Vec<f64>, end: Vec<f64> },
    /// Initial and final best of a previous run's JSON result.
    FromRun { from_run: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub s: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutsConfig {
    pub problem: ProblemSpec,
    pub anchors: Anchors,
    /// Surrogate to compare against; needs `training` or `training_csv`.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub training: Option<TrainingSpec>,
    #[serde(default)]
    pub training_csv: Option<PathBuf>,
    #[serde(default = "default_cut_start")]
    pub t_start: f64,
    #[serde(default = "default_cut_end")]
    pub t_end: f64,
    #[serde(default = "default_cut_points")]
    pub points: usize,
    pub output: PathBuf,
}

fn default_cut_start() -> f64 {
    -0.25
}

fn default_cut_end() -> f64 {
    1.25
}

fn default_cut_points() -> usize {
    101
}

impl CutsConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error("path", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.points == 0 || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(config_error("points", "cut grid needs at least one point and finite ends"));
        }
        if let Anchors::Explicit { start, end } = &self.anchors {
            let dims = self.problem.dims();
            if start.len() != dims || end.len() != dims {
                return Err(config_error("anchors", format!("anchors must have {dims} components")));
            }
        }
        match (&self.model, &self.training, &self.training_csv) {
            (None, None, None) => Ok(()),
            (Some(_), Some(_), None) | (Some(_), None, Some(_)) => Ok(()),
            (None, _, _) => Err(config_error("model", "training data given without a model")),
            (Some(_), None, None) => Err(config_error("training", "a model needs `training` or `training_csv`")),
            (Some(_), Some(_), Some(_)) => Err(config_error("training", "give only one of `training` and `training_csv`")),
        }
    }

    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

fn resolve_anchors(anchors: &Anchors) -> Result<(Vec<f64>, Vec<f64>)> {
    match anchors {
        Anchors::Explicit { start, end } => Ok((start.clone(), end.clone())),
        Anchors::FromRun { from_run } => {
            let text = fs::read_to_string(from_run)
                .map_err(|e| config_error("anchors.from_run", format!("{}: {e}", from_run.display())))?;
            let run: RunResult = serde_json::from_str(&text)
                .map_err(|e| config_error("anchors.from_run", e.to_string()))?;
            if run.initial_best.is_empty() || run.best.is_empty() {
                return Err(config_error("anchors.from_run", "run has no recorded bests"));
            }
            Ok((run.initial_best, run.best))
        }
    }
}

/// Sample the true cost (and the optional surrogate) along the line through
/// the two anchors. Returns the CSV text, also written to `output`.
pub fn run_cuts(cfg: &CutsConfig) -> Result<String> {
    let problem = cfg.problem.build()?;
    let (start, end) = resolve_anchors(&cfg.anchors)?;
    problem.space().check_dims(&start)?;
    problem.space().check_dims(&end)?;
    let model = match &cfg.model {
        None => None,
        Some(spec) => {
            let data = match (&cfg.training, &cfg.training_csv) {
                (Some(t), _) => evaluate_plan(&problem, &lhs(problem.space(), t.s, t.seed)?)?,
                (None, Some(path)) => TrainingSet::read_csv(path)?,
                (None, None) => return Err(config_error("training", "missing training data")),
            };
            Some(spec.fit(&data)?)
        }
    };
    let ts = cut_grid(cfg.t_start, cfg.t_end, cfg.points);
    let cut = functional_cut(&problem, problem.space(), &start, &end, &ts)?;
    let mut out = String::from("t,phi_true,phi_model,psi_model\n");
    for point in &cut {
        let (phi, psi) = match &model {
            Some(m) => {
                let p = m.predict(&point.x)?;
                (Some(p.value), p.confidence)
            }
            None => (None, None),
        };
        let _ = writeln!(out, "{:?},{:?},{},{}", point.t, point.cost, fmt_opt(phi), fmt_opt(psi));
    }
    write_atomic(&cfg.output, &out)?;
    Ok(out)
}

/// What `validate` found in a config file.
#[derive(Debug, Clone)]
pub enum ValidatedConfig {
    Experiment(Box<Experiment>),
    Cuts(Box<CutsConfig>),
}

/// Parse either kind of config; a top-level `anchors` key marks a cuts
/// config.
pub fn validate_text(text: &str) -> Result<ValidatedConfig> {
    let value: serde_json::Value = parse_json(text)?;
    if value.get("anchors").is_some() {
        Ok(ValidatedConfig::Cuts(Box::new(CutsConfig::parse(text)?)))
    } else {
        Ok(ValidatedConfig::Experiment(Box::new(Experiment::parse(text)?)))
    }
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(config_error(WORKERS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn arms_expand_over_sweeps() {
        let arm: ArmSpec = serde_json::from_str(
            r#"{"algorithm": "bare-sbd", "model": {"kind": "svr"}, "optimizer": "de", "s_per_dim": [5, 10]}"#,
        )
        .unwrap();
        let arms = arm.expand(6).unwrap();
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].label, "bare-svr-de-s30");
        assert_eq!(arms[1].algorithm.budget(), Some(60));
        let both: ArmSpec = serde_json::from_str(
            r#"{"algorithm": "bare-sbd", "model": {"kind": "ok"}, "optimizer": "pso", "s": 5, "s_per_dim": 1}"#,
        )
        .unwrap();
        assert!(both.expand(2).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"algorithm": "std-pso", "colour": 1}"#;
        assert!(serde_json::from_str::<ArmSpec>(bad).is_err());
        let bad = r#"{"type": "benchmark", "name": "ackley", "dims": 2, "extra": true}"#;
        assert!(serde_json::from_str::<ProblemSpec>(bad).is_err());
    }

    #[test]
    fn seeds_split_from_master() {
        let split = SeedSpec::Split { count: 3, master: 9 }.resolve();
        assert_eq!(split.len(), 3);
        assert_eq!(split[1], derive_seed(9, Stream::Seeds, 1));
        assert_eq!(SeedSpec::List(vec![4, 5]).resolve(), vec![4, 5]);
    }

    #[test]
    fn tma_problem_spec() {
        let spec: ProblemSpec = serde_json::from_str(r#"{"type": "tma", "n_elements": 16}"#).unwrap();
        assert_eq!(spec.dims(), 8);
        let cfg = spec.tma_config().unwrap().unwrap();
        assert_eq!(cfg.durations.len(), 16);
        let odd: ProblemSpec = serde_json::from_str(r#"{"type": "tma", "n_elements": 15}"#).unwrap();
        assert!(odd.validate().is_err());
    }
}
