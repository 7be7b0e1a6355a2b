//! Surrogate-assisted global optimization.
//!
//! The crate covers the full loop of a simulation-driven design study:
//! cheap surrogates ([`surrogate`]) trained on designs drawn by
//! [`sampling`], evolutionary optimizers ([`optimize`]) run either on the
//! expensive objective or on a surrogate, the confidence-driven swarm of
//! [`confidence`] that decides online which particles deserve a true
//! evaluation, and the budget arithmetic of [`accounting`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod benchmarks;
pub mod confidence;
pub mod error;
pub mod harness;
pub mod optimize;
pub mod problem;
pub mod rng;
pub mod sampling;
pub mod surrogate;

pub use error::{Result, SbdError};
pub use problem::{Evaluator, Problem, SearchSpace};
