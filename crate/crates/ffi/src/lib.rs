//! C ABI over `sbd-core`.
//!
//! Every function returns an [`SbdStatus`]; on failure a message for the
//! calling thread is available from [`sbd_last_error_message`]. Objects
//! cross the boundary as opaque handles that the caller frees with the
//! matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sbd_core::accounting::{budget_from_saving, time_saving};
use sbd_core::benchmarks::{tma_cost, Benchmark, TmaConfig};
use sbd_core::confidence::{pso_ok_c_run, CsbdConfig};
use sbd_core::optimize::{de_run, pso_run, OptimizerConfig, RunResult};
use sbd_core::surrogate::{ModelKind, Surrogate, TrainingSet};
use sbd_core::{Problem, SbdError, SearchSpace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// A linear system could not be solved (coincident samples, no
    /// positive-definite correlation matrix).
    Singular = 4,
    NotConverged = 5,
    Runtime = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbdModelKind {
    Rbfn = 0,
    Svr = 1,
    Kriging = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbdOptimizer {
    Pso = 0,
    De = 1,
}

/// Objective callback: cost of the `dims`-vector `x`. Called serially.
pub type SbdObjective = Option<unsafe extern "C" fn(x: *const f64, dims: usize, user: *mut c_void) -> f64>;

/// Opaque training database.
pub struct SbdTrainingSet(TrainingSet);

/// Opaque fitted surrogate.
pub struct SbdModel(Surrogate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &SbdError) -> SbdStatus {
    match err {
        SbdError::DimensionMismatch { .. } => SbdStatus::DimensionMismatch,
        SbdError::SingularSystem { .. } | SbdError::NotPositiveDefinite { .. } => SbdStatus::Singular,
        SbdError::NoConvergence { .. } => SbdStatus::NotConverged,
        SbdError::InvalidArgument(_)
        | SbdError::InvalidSpace(_)
        | SbdError::EmptyTrainingSet
        | SbdError::SwitchInstantOutOfRange { .. }
        | SbdError::Config { .. }
        | SbdError::GridTooLarge { .. } => SbdStatus::InvalidArgument,
        _ => SbdStatus::Runtime,
    }
}

struct Failure(SbdStatus, String);

impl From<SbdError> for Failure {
    fn from(err: SbdError) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SbdStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SbdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SbdStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SbdStatus::Panic
        }
    }
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sbd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Percentage of true evaluations saved by `s` simulations against `p * i`.
#[no_mangle]
pub unsafe extern "C" fn sbd_time_saving(p: usize, i: usize, s: usize, out: *mut f64) -> SbdStatus {
    guard(|| {
        *out_arg(out, "out")? = time_saving(p, i, s)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sbd_budget_from_saving(p: usize, i: usize, saving: f64, out: *mut usize) -> SbdStatus {
    guard(|| {
        *out_arg(out, "out")? = budget_from_saving(p, i, saving)?;
        Ok(())
    })
}

/// Evaluate a named benchmark (`levy`, `schwefel`, `ackley`).
#[no_mangle]
pub unsafe extern "C" fn sbd_benchmark_eval(name: *const c_char, x: *const f64, dims: usize, out: *mut f64) -> SbdStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Failure(SbdStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let bench: Benchmark = name.parse()?;
        let x = slice_arg(x, dims, "x")?;
        *out_arg(out, "out")? = bench.evaluate(x);
        Ok(())
    })
}

/// Ripple cost of an `n_elements` time-modulated array with Dolph-Chebyshev
/// durations at `sll_db` (negative dB), for the `n_elements / 2` switch-on
/// instants.
#[no_mangle]
pub unsafe extern "C" fn sbd_tma_cost(
    n_elements: usize,
    sll_db: f64,
    omega: *const f64,
    dims: usize,
    out: *mut f64,
) -> SbdStatus {
    guard(|| {
        let cfg = TmaConfig::chebyshev(n_elements, sll_db)?;
        let omega = slice_arg(omega, dims, "omega")?;
        *out_arg(out, "out")? = tma_cost(&cfg, omega)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn sbd_training_set_new(dims: usize) -> *mut SbdTrainingSet {
    Box::into_raw(Box::new(SbdTrainingSet(TrainingSet::new(dims))))
}

#[no_mangle]
pub unsafe extern "C" fn sbd_training_set_free(set: *mut SbdTrainingSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Add a sample; a repeated input replaces the earlier cost.
#[no_mangle]
pub unsafe extern "C" fn sbd_training_set_push(set: *mut SbdTrainingSet, x: *const f64, dims: usize, cost: f64) -> SbdStatus {
    guard(|| {
        let set = out_arg(set, "set")?;
        let x = slice_arg(x, dims, "x")?;
        set.0.push(x.to_vec(), cost)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sbd_training_set_len(set: *const SbdTrainingSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Fit a surrogate with default hyperparameters.
#[no_mangle]
pub unsafe extern "C" fn sbd_model_fit(set: *const SbdTrainingSet, kind: SbdModelKind, out: *mut *mut SbdModel) -> SbdStatus {
    guard(|| {
        let set = set.as_ref().ok_or_else(|| null("set"))?;
        let out = out_arg(out, "out")?;
        let kind = match kind {
            SbdModelKind::Rbfn => ModelKind::Rbfn,
            SbdModelKind::Svr => ModelKind::Svr,
            SbdModelKind::Kriging => ModelKind::Ok,
        };
        let model = kind.default_spec().fit(&set.0)?;
        *out = Box::into_raw(Box::new(SbdModel(model)));
        Ok(())
    })
}

/// Predicted cost and, for Kriging, its standard deviation (NaN for the
/// other families). `confidence` may be null.
#[no_mangle]
pub unsafe extern "C" fn sbd_model_predict(
    model: *const SbdModel,
    x: *const f64,
    dims: usize,
    value: *mut f64,
    confidence: *mut f64,
) -> SbdStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice_arg(x, dims, "x")?;
        let value = out_arg(value, "value")?;
        let p = model.0.predict(x)?;
        *value = p.value;
        if let Some(c) = confidence.as_mut() {
            *c = p.confidence.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sbd_model_free(model: *mut SbdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[derive(Clone, Copy)]
struct Callback {
    f: unsafe extern "C" fn(*const f64, usize, *mut c_void) -> f64,
    user: *mut c_void,
}

// The callback is only ever invoked from the single worker of the pool
// built in `with_problem`.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

unsafe fn with_problem<T>(
    objective: SbdObjective,
    user: *mut c_void,
    lower: *const f64,
    upper: *const f64,
    dims: usize,
    body: impl FnOnce(&Problem) -> Result<T, Failure> + Send,
) -> Result<T, Failure>
where
    T: Send,
{
    let f = objective.ok_or_else(|| null("objective"))?;
    let space = SearchSpace::new(slice_arg(lower, dims, "lower")?.to_vec(), slice_arg(upper, dims, "upper")?.to_vec())?;
    let cb = Callback { f, user };
    let problem = Problem::new(space, move |x: &[f64]| {
        let cb = cb;
        unsafe { (cb.f)(x.as_ptr(), x.len(), cb.user) }
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Failure(SbdStatus::Runtime, e.to_string()))?;
    pool.install(|| body(&problem))
}

unsafe fn write_result(run: &RunResult, best: *mut f64, best_cost: *mut f64, true_evals: *mut usize) -> Result<(), Failure> {
    if best.is_null() {
        return Err(null("best"));
    }
    ptr::copy_nonoverlapping(run.best.as_ptr(), best, run.best.len());
    *out_arg(best_cost, "best_cost")? = run.best_cost;
    if let Some(t) = true_evals.as_mut() {
        *t = run.true_evals_used;
    }
    Ok(())
}

/// Run PSO or DE on the callback objective over the box
/// `[lower, upper]`. `best` receives `dims` values; `true_evals` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn sbd_optimize(
    optimizer: SbdOptimizer,
    objective: SbdObjective,
    user: *mut c_void,
    lower: *const f64,
    upper: *const f64,
    dims: usize,
    agents: usize,
    iterations: usize,
    seed: u64,
    best: *mut f64,
    best_cost: *mut f64,
    true_evals: *mut usize,
) -> SbdStatus {
    guard(|| {
        let config = OptimizerConfig::new(agents, iterations, seed);
        let run = with_problem(objective, user, lower, upper, dims, |problem| {
            Ok(match optimizer {
                SbdOptimizer::Pso => pso_run(problem, problem.space(), &config)?,
                SbdOptimizer::De => de_run(problem, problem.space(), &config)?,
            })
        })?;
        write_result(&run, best, best_cost, true_evals)
    })
}

/// Confidence-driven surrogate PSO with at most `s` calls to the objective,
/// `s0` of them on the initial design.
#[no_mangle]
pub unsafe extern "C" fn sbd_pso_ok_c(
    objective: SbdObjective,
    user: *mut c_void,
    lower: *const f64,
    upper: *const f64,
    dims: usize,
    agents: usize,
    iterations: usize,
    s0: usize,
    s: usize,
    zeta: f64,
    seed: u64,
    best: *mut f64,
    best_cost: *mut f64,
    true_evals: *mut usize,
) -> SbdStatus {
    guard(|| {
        let config = OptimizerConfig::new(agents, iterations, seed);
        let mut csbd = CsbdConfig::new(s0, s);
        csbd.zeta = zeta;
        let run = with_problem(objective, user, lower, upper, dims, |problem| {
            Ok(pso_ok_c_run(problem, &config, &csbd)?.run)
        })?;
        write_result(&run, best, best_cost, true_evals)
    })
}
