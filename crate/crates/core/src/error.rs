use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficients sum to {sum}, expected 1 within {tol:e}")]
    Unnormalized { sum: f64, tol: f64 },

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("cannot invert for {param}: {reason}")]
    InversionDomain { param: &'static str, reason: String },

    #[error("distillation map has zero success weight")]
    DegenerateMap,

    #[error("distilled estimate not certifiable: pi_hat - 2 eps_T = {margin} <= 0")]
    NotCertifiable { margin: f64 },

    #[error("no feasible budget: {0}")]
    NoFeasibleBudget(String),

    #[error("malformed summary: {0}")]
    MalformedSummary(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
