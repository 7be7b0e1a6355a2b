//! Search spaces, the evaluation ledger and the functional-cut diagnostic.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SbdError};

/// Box-bounded search space of `K` real degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(SbdError::InvalidSpace("at least one dimension is required".into()));
        }
        if lower.len() != upper.len() {
            return Err(SbdError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SbdError::InvalidSpace(format!(
                    "dimension {k}: bounds [{lo}, {hi}] must be finite with lower < upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` in each of `dims` dimensions.
    pub fn uniform(dims: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dims], vec![hi; dims])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims() {
            return Err(SbdError::DimensionMismatch {
                expected: self.dims(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Project `x` componentwise into the box.
    pub fn clamp(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect())
    }
}

/// Anything that maps a design vector to a scalar cost.
pub trait Evaluator: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;

    /// Evaluate a batch; results come back in input order whatever the
    /// worker count of the current rayon pool.
    fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.par_iter().map(|x| self.evaluate(x)).collect()
    }
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One true (expensive) evaluation recorded in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub x: Vec<f64>,
    pub cost: f64,
}

/// A bounded problem backed by the expensive objective. Every call to
/// [`Problem::evaluate`] is counted and recorded.
pub struct Problem {
    space: SearchSpace,
    objective: Objective,
    eval_count: AtomicUsize,
    ledger: Mutex<Vec<LedgerEntry>>,
    nominal_eval_time: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("space", &self.space)
            .field("eval_count", &self.eval_count())
            .field("nominal_eval_time", &self.nominal_eval_time)
            .finish()
    }
}

impl Problem {
    pub fn new<F>(space: SearchSpace, objective: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_objective(space, Arc::new(objective))
    }

    pub fn from_objective(space: SearchSpace, objective: Objective) -> Self {
        Self {
            space,
            objective,
            eval_count: AtomicUsize::new(0),
            ledger: Mutex::new(Vec::new()),
            nominal_eval_time: 0.0,
        }
    }

    /// Seconds charged per true evaluation in timing reports.
    pub fn with_nominal_eval_time(mut self, seconds: f64) -> Self {
        self.nominal_eval_time = seconds;
        self
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn dims(&self) -> usize {
        self.space.dims()
    }

    pub fn nominal_eval_time(&self) -> f64 {
        self.nominal_eval_time
    }

    pub fn eval_count(&self) -> usize {
        self.eval_count.load(Ordering::SeqCst)
    }

    /// Snapshot of every true evaluation performed so far.
    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.ledger.lock().expect("ledger poisoned").clone()
    }

    /// Run the objective without touching the counter or the ledger. Only for
    /// diagnostics that are reported separately from the budget.
    pub fn evaluate_untracked(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    /// A fresh problem sharing the same objective, with a zeroed ledger.
    pub fn fresh(&self) -> Self {
        Self {
            space: self.space.clone(),
            objective: Arc::clone(&self.objective),
            eval_count: AtomicUsize::new(0),
            ledger: Mutex::new(Vec::new()),
            nominal_eval_time: self.nominal_eval_time,
        }
    }
}

impl Evaluator for Problem {
    fn evaluate(&self, x: &[f64]) -> f64 {
        let cost = (self.objective)(x);
        self.eval_count.fetch_add(1, Ordering::SeqCst);
        self.ledger.lock().expect("ledger poisoned").push(LedgerEntry {
            x: x.to_vec(),
            cost,
        });
        cost
    }
}

/// One sample of a functional cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub cost: f64,
    /// The interpolated point fell outside the box and was clamped.
    pub clamped: bool,
}

/// Point on the segment through `a` (t = 0) and `b` (t = 1).
pub fn cut_point(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| (1.0 - t) * p + t * q).collect()
}

/// Sample the cost along the line through `a` and `b` at each `t`.
pub fn functional_cut<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &SearchSpace,
    a: &[f64],
    b: &[f64],
    ts: &[f64],
) -> Result<Vec<CutPoint>> {
    space.check_dims(a)?;
    space.check_dims(b)?;
    if let Some(t) = ts.iter().find(|t| !t.is_finite()) {
        return Err(SbdError::InvalidArgument(format!("non-finite cut parameter {t}")));
    }
    let points: Vec<(Vec<f64>, bool)> = ts
        .iter()
        .map(|&t| {
            let raw = cut_point(a, b, t);
            let clamped = !space.contains(&raw);
            let x = if clamped { space.clamp(&raw).expect("dims checked") } else { raw };
            (x, clamped)
        })
        .collect();
    let xs: Vec<Vec<f64>> = points.iter().map(|(x, _)| x.clone()).collect();
    let costs = evaluator.evaluate_batch(&xs);
    Ok(ts
        .iter()
        .zip(points)
        .zip(costs)
        .map(|((&t, (x, clamped)), cost)| CutPoint { t, x, cost, clamped })
        .collect())
}

/// Evenly spaced cut parameters over `[start, end]`.
pub fn cut_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
