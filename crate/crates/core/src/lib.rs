//! Simulator and estimator for the double selection entanglement
//! distillation round.
//!
//! The estimator recovers the Bell-diagonal coefficients of noisy pairs from
//! the coincidence statistics of a single distillation round, with a
//! Hoeffding-backed bound on the trace distance of the estimate.

// `!(a > b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bell;
pub mod check;
pub mod cli;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod histogram;
pub mod oracle;
pub mod planner;
pub mod records;
pub mod rng;
pub mod statevector;

pub use analytic::CoincidenceProbabilities;
pub use bell::{BellDiagonalState, BellLabel, XVector};
pub use engine::{RunSummary, TripletRecord};
pub use error::{Error, Result};
pub use estimator::{EstimateReport, Estimation, ErrorBudget, ParamBand};
