//! Simulation-budget bookkeeping: how many expensive evaluations a
//! surrogate-driven run saves relative to running the optimizer directly on
//! the expensive objective.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};

/// Agents, iterations and true evaluations of one run, with an optional
/// processor count for the parallel estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub agents: usize,
    pub iterations: usize,
    pub true_evals: usize,
    pub processors: Option<usize>,
}

impl Budget {
    pub fn new(agents: usize, iterations: usize, true_evals: usize) -> Result<Self> {
        if agents == 0 || iterations == 0 {
            return Err(SbdError::InvalidArgument(
                "agents and iterations must be at least 1".into(),
            ));
        }
        if true_evals > agents * iterations {
            return Err(SbdError::InvalidArgument(format!(
                "true evaluations {true_evals} exceed agents x iterations = {}",
                agents * iterations
            )));
        }
        Ok(Self {
            agents,
            iterations,
            true_evals,
            processors: None,
        })
    }

    pub fn with_processors(mut self, processors: usize) -> Result<Self> {
        if processors == 0 {
            return Err(SbdError::InvalidArgument("processors must be at least 1".into()));
        }
        self.processors = Some(processors);
        Ok(self)
    }
}

/// Percentage of expensive evaluations saved when `s` simulations replace
/// the `p * i` of a direct run. Negative when `s > p * i`.
pub fn time_saving(p: usize, i: usize, s: usize) -> Result<f64> {
    if p == 0 || i == 0 {
        return Err(SbdError::InvalidArgument(
            "agents and iterations must be at least 1".into(),
        ));
    }
    let total = (p * i) as f64;
    Ok((total - s as f64) * 100.0 / total)
}

/// Largest number of simulations compatible with a target saving.
pub fn budget_from_saving(p: usize, i: usize, target_saving: f64) -> Result<usize> {
    if !(0.0..=100.0).contains(&target_saving) {
        return Err(SbdError::InvalidArgument(format!(
            "target saving {target_saving} outside [0, 100]"
        )));
    }
    let total = (p * i) as f64;
    // 1e-9 absorbs representation error of the saving before flooring
    Ok((total * (100.0 - target_saving) / 100.0 + 1e-9).floor() as usize)
}

/// Saving with `o` processors sharing the training simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelSaving {
    pub percent: f64,
    /// `(1 - 1/I) * 100`, reported when every training simulation can run
    /// concurrently (`o >= s`).
    pub saturated: Option<f64>,
}

pub fn parallel_time_saving(s: usize, o: usize, i: usize) -> Result<ParallelSaving> {
    if o == 0 || i == 0 {
        return Err(SbdError::InvalidArgument(
            "processors and iterations must be at least 1".into(),
        ));
    }
    let denom = (o * i) as f64;
    let percent = (denom - s as f64) * 100.0 / denom;
    let saturated = (o >= s).then(|| (i as f64 - 1.0) * 100.0 / i as f64);
    Ok(ParallelSaving { percent, saturated })
}

/// Wall-time estimates in seconds for direct and surrogate-driven runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub standard: f64,
    pub surrogate: f64,
    pub surrogate_build: f64,
    pub standard_parallel: Option<f64>,
    pub surrogate_parallel: Option<f64>,
}

pub fn timing_estimates(
    budget: &Budget,
    dt_fw: f64,
    dt_train: f64,
    dt_test: f64,
) -> Result<TimingReport> {
    if dt_fw < 0.0 || dt_train < 0.0 || dt_test < 0.0 {
        return Err(SbdError::InvalidArgument("times must be non-negative".into()));
    }
    let evals = (budget.agents * budget.iterations) as f64;
    let standard = evals * dt_fw;
    let surrogate_build = budget.true_evals as f64 * dt_fw + dt_train;
    let surrogate = surrogate_build + evals * dt_test;
    let (standard_parallel, surrogate_parallel) = match budget.processors {
        Some(o) => (
            Some(standard / budget.agents as f64),
            Some(surrogate_build / o as f64 + evals * dt_test / budget.agents as f64),
        ),
        None => (None, None),
    };
    Ok(TimingReport {
        standard,
        surrogate,
        surrogate_build,
        standard_parallel,
        surrogate_parallel,
    })
}
