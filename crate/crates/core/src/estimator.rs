//! Distillation-based estimator: inverts the empirical coincidence
//! probabilities of a single round and attaches Hoeffding-backed error bands
//! and a trace-distance certificate.
//!
//! Each parameter band is built by pushing the empirical probabilities to the
//! clamped corners `p̂ ± ε` and inverting there. For `x3` the upper corner
//! lowers `p^Z`, `p^X` and raises `p^XZ`; the lower corner does the opposite.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, CoincidenceProbabilities};
use crate::bell::{trace_distance, x_to_q, BellDiagonalState, XVector};
use crate::engine::RunSummary;
use crate::error::{Error, Result};
use crate::oracle::distilled_map;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Additive errors on the three coincidence probabilities and the number of
/// triplets they are estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub eps_z: f64,
    pub eps_x: f64,
    pub eps_xz: f64,
    pub n: u64,
}

impl ErrorBudget {
    pub fn new(eps_z: f64, eps_x: f64, eps_xz: f64, n: u64) -> Result<Self> {
        for (what, e) in [("eps_z", eps_z), ("eps_x", eps_x), ("eps_xz", eps_xz)] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Domain {
                    what,
                    value: e,
                    domain: "(0, 1)",
                });
            }
        }
        if n == 0 {
            return Err(Error::Domain {
                what: "n",
                value: 0.0,
                domain: "n >= 1",
            });
        }
        Ok(Self {
            eps_z,
            eps_x,
            eps_xz,
            n,
        })
    }

    pub fn delta_z(&self) -> f64 {
        hoeffding_delta_unchecked(self.n as f64, self.eps_z)
    }

    pub fn delta_x(&self) -> f64 {
        hoeffding_delta_unchecked(self.n as f64, self.eps_x)
    }

    pub fn delta_xz(&self) -> f64 {
        hoeffding_delta_unchecked(self.n as f64, self.eps_xz)
    }
}

/// Two-sided additive error on one transformed parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBand {
    /// `x̂ − lower`
    pub eps_left: f64,
    /// `upper − x̂`
    pub eps_right: f64,
    pub eps: f64,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParamBand {
    fn new(estimate: f64, lower: f64, upper: f64, delta: f64) -> Self {
        let eps_left = (estimate - lower).max(0.0);
        let eps_right = (upper - estimate).max(0.0);
        Self {
            eps_left,
            eps_right,
            eps: eps_left.max(eps_right),
            delta,
            lower,
            upper,
        }
    }
}

/// `min(1, 2·exp(−2nε²))`.
pub fn hoeffding_delta(n: u64, eps: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain {
            what: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
            domain: "eps > 0",
        });
    }
    Ok(hoeffding_delta_unchecked(n as f64, eps))
}

/// Real-valued `n` is used by the planner's root finding.
pub(crate) fn hoeffding_delta_unchecked(n: f64, eps: f64) -> f64 {
    (2.0 * (-2.0 * n * eps * eps).exp()).min(1.0)
}

fn hi(p: f64, eps: f64) -> f64 {
    (p + eps).min(1.0)
}

fn lo(p: f64, eps: f64, floor: f64) -> f64 {
    (p - eps).max(floor)
}

/// Band for `x1` from `p̂^Z`; `δ1 = δ^Z`.
pub fn band_x1(p_hat_z: f64, eps_z: f64, n: u64) -> Result<ParamBand> {
    let delta = hoeffding_delta(n, eps_z)?;
    let estimate = analytic::invert_x1(p_hat_z)?;
    let upper = analytic::x1_formula(hi(p_hat_z, eps_z));
    let lower = analytic::x1_formula(lo(p_hat_z, eps_z, 0.5));
    Ok(ParamBand::new(estimate, lower, upper, delta))
}

/// Band for `x2` from `p̂^X`; `δ2 = δ^X`.
pub fn band_x2(p_hat_x: f64, eps_x: f64, n: u64) -> Result<ParamBand> {
    let delta = hoeffding_delta(n, eps_x)?;
    let estimate = analytic::invert_x2(p_hat_x)?;
    let upper = analytic::x2_formula(hi(p_hat_x, eps_x));
    let lower = analytic::x2_formula(lo(p_hat_x, eps_x, 0.5));
    Ok(ParamBand::new(estimate, lower, upper, delta))
}

/// Band for `x3`; `δ3 = δ^Z + δ^X + δ^XZ`.
///
/// The upper corner is capped at 1 since `x3 ≤ 1` for every state. The
/// lower corner must be a real number in `[1/2, 1]`.
pub fn band_x3(p_hat: &CoincidenceProbabilities, budget: &ErrorBudget) -> Result<ParamBand> {
    let delta = hoeffding_delta(budget.n, budget.eps_z)?
        + hoeffding_delta(budget.n, budget.eps_x)?
        + hoeffding_delta(budget.n, budget.eps_xz)?;
    let estimate = analytic::invert_x3(p_hat)?;
    let upper_corner = CoincidenceProbabilities::new(
        lo(p_hat.p_z, budget.eps_z, 0.5),
        lo(p_hat.p_x, budget.eps_x, 0.5),
        hi(p_hat.p_xz, budget.eps_xz),
    );
    let lower_corner = CoincidenceProbabilities::new(
        hi(p_hat.p_z, budget.eps_z),
        hi(p_hat.p_x, budget.eps_x),
        lo(p_hat.p_xz, budget.eps_xz, 0.25),
    );
    let upper = analytic::x3_formula(&upper_corner)?.min(1.0);
    let lower = analytic::invert_x3(&lower_corner)?;
    Ok(ParamBand::new(estimate, lower, upper, delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub q_hat: BellDiagonalState,
    pub x_hat: XVector,
    pub bands: [ParamBand; 3],
    /// `ε1 + ε2 + ε3`, the trace-distance bound.
    pub eps_t: f64,
    /// Failure probability, clamped to 1.
    pub delta_t: f64,
    /// `δ1 + δ2 + δ3` before clamping.
    pub delta_t_raw: f64,
    /// Set when the unclamped failure probability reaches 1.
    pub vacuous: bool,
    pub p_hat: CoincidenceProbabilities,
    pub budget: ErrorBudget,
}

impl EstimateReport {
    /// True when `D(q̂, truth) < ε_T`, the event the certificate covers.
    pub fn covers(&self, truth: &BellDiagonalState) -> bool {
        trace_distance(&self.q_hat, truth) < self.eps_t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFailure {
    /// 1, 2 or 3.
    pub param: u8,
    pub reason: String,
}

/// Outcome of the failure branch: no estimate, `ε_T = δ_T = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationFailure {
    pub failures: Vec<ParamFailure>,
    pub eps_t: f64,
    pub delta_t: f64,
    pub p_hat: CoincidenceProbabilities,
    pub budget: ErrorBudget,
}

impl EstimationFailure {
    pub const MESSAGE: &'static str =
        "Estimation protocol fails. Increase N and/or change the coincidence errors.";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Estimation {
    Success(EstimateReport),
    Failure(EstimationFailure),
}

impl Estimation {
    pub fn report(&self) -> Option<&EstimateReport> {
        match self {
            Estimation::Success(r) => Some(r),
            Estimation::Failure(_) => None,
        }
    }
}

/// Runs the estimator on one round's statistics with coincidence errors
/// `eps = (ε^Z, ε^X, ε^XZ)`.
///
/// Inversion problems at `p̂` or at any band corner take the failure branch
/// and are returned as [`Estimation::Failure`]. Only malformed inputs are
/// errors.
pub fn estimate(summary: &RunSummary, eps: [f64; 3]) -> Result<Estimation> {
    summary.validate()?;
    let budget = ErrorBudget::new(eps[0], eps[1], eps[2], summary.n)?;
    let p_hat = summary.p_hat;

    let attempts = [
        band_x1(p_hat.p_z, budget.eps_z, budget.n),
        band_x2(p_hat.p_x, budget.eps_x, budget.n),
        band_x3(&p_hat, &budget),
    ];
    let mut failures = Vec::new();
    let mut bands = Vec::with_capacity(3);
    for (i, attempt) in attempts.into_iter().enumerate() {
        match attempt {
            Ok(b) => bands.push(b),
            Err(Error::InversionDomain { reason, .. }) => failures.push(ParamFailure {
                param: i as u8 + 1,
                reason,
            }),
            Err(e) => return Err(e),
        }
    }
    if !failures.is_empty() {
        return Ok(Estimation::Failure(EstimationFailure {
            failures,
            eps_t: 1.0,
            delta_t: 1.0,
            p_hat,
            budget,
        }));
    }
    let bands: [ParamBand; 3] = bands.try_into().expect("three bands");

    // Band construction already inverted p̂; repeat for the point estimate.
    let x_hat = analytic::invert(&p_hat)?;
    let q_hat = x_to_q(&x_hat);
    let eps_t = bands.iter().map(|b| b.eps).sum();
    let delta_t_raw: f64 = bands.iter().map(|b| b.delta).sum();
    Ok(Estimation::Success(EstimateReport {
        q_hat,
        x_hat,
        bands,
        eps_t,
        delta_t: delta_t_raw.min(1.0),
        delta_t_raw,
        vacuous: delta_t_raw >= 1.0,
        p_hat,
        budget,
    }))
}

/// Estimate of the Bell-diagonal part of the distilled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledEstimate {
    pub q_d_hat: BellDiagonalState,
    pub pi_hat: f64,
    pub eps_d: f64,
    pub delta_t: f64,
}

/// `ε_d = 2ε_T / (π̂ − 2ε_T)`; not certifiable when the denominator is not
/// positive.
pub fn distilled_error(pi_hat: f64, eps_t: f64) -> Result<f64> {
    let margin = pi_hat - 2.0 * eps_t;
    if !(margin > 0.0) {
        return Err(Error::NotCertifiable { margin });
    }
    Ok(2.0 * eps_t / margin)
}

/// Pushes the undistilled estimate through the round's instrument. The
/// certificate keeps the undistilled failure probability.
pub fn distilled_estimate(report: &EstimateReport) -> Result<DistilledEstimate> {
    let (q_d_hat, pi_hat) = distilled_map(&report.q_hat)?;
    Ok(DistilledEstimate {
        q_d_hat,
        pi_hat,
        eps_d: distilled_error(pi_hat, report.eps_t)?,
        delta_t: report.delta_t,
    })
}
