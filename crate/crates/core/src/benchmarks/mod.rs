//! Analytic objectives: classic multimodal test functions and a
//! time-modulated array ripple cost.

mod functions;
mod tma;

pub use functions::{ackley, levy, schwefel, Benchmark};
pub use tma::{
    array_factor_db, chebyshev_durations, expand_symmetric, on_state, tma_cost, tma_problem,
    tma_directivity_trace, tma_instantaneous_directivity, TmaConfig, DEFAULT_TIME_GRID,
    MIN_TIME_GRID,
};
