//! Sample-size planning for the estimator and the comparison against
//! single-copy local tomography.
//!
//! Planning evaluates band widths at `p̂ = p(planning_state)`: for each
//! target `εi` it finds the coincidence error whose band has exactly that
//! width, then solves `δ1 + δ2 + δ3 = δ_T` for the triplet count.

use serde::{Deserialize, Serialize};

use crate::analytic::{coincidence_probs, CoincidenceProbabilities};
use crate::bell::{q_to_x, BellDiagonalState};
use crate::error::{Error, Result};
use crate::estimator::{band_x1, band_x2, band_x3, ErrorBudget};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative tolerance of every bracketing root find.
pub const ROOT_REL_TOL: f64 = 1e-12;

/// Smallest coincidence error tried when searching for a budget.
const EPS_FLOOR: f64 = 1e-15;
const EPS_CEIL: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTarget {
    pub delta_t: f64,
    pub eps_targets: [f64; 3],
    pub planning_state: BellDiagonalState,
}

impl PlanTarget {
    pub fn new(delta_t: f64, eps_targets: [f64; 3], planning_state: BellDiagonalState) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t < 1.0) {
            return Err(Error::Domain {
                what: "delta_T",
                value: delta_t,
                domain: "(0, 1)",
            });
        }
        for e in eps_targets {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Domain {
                    what: "eps target",
                    value: e,
                    domain: "eps > 0",
                });
            }
        }
        if !planning_state.is_admissible() {
            return Err(Error::Domain {
                what: "planning q1",
                value: planning_state.fidelity(),
                domain: "physical states with q1 > 1/2",
            });
        }
        Ok(Self {
            delta_t,
            eps_targets,
            planning_state,
        })
    }

    /// Targets used for the resource comparison against tomography:
    /// `ε1 = ε2 = 1e-3`, `ε3 = 5e-3`, `δ_T = 1e-2`.
    pub fn reference(planning_state: BellDiagonalState) -> Result<Self> {
        Self::new(1e-2, [1e-3, 1e-3, 5e-3], planning_state)
    }
}

/// Finds the boundary between `pred = true` (at `lo`) and `pred = false`
/// (at `hi`). Returns the last point known to satisfy `pred`.
pub fn bisect<F: Fn(f64) -> bool>(pred: F, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    for _ in 0..2000 {
        if hi - lo <= ROOT_REL_TOL * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Ceiling that ignores floating noise right above an integer.
fn ceil_count(n: f64) -> u64 {
    let c = (n * (1.0 - 1e-12)).ceil();
    c.max(1.0) as u64
}

/// Equal coincidence errors: `δ_T = 10·exp(−2Nε²)`, so
/// `N = ⌈ln(10/δ_T) / (2ε²)⌉`.
pub fn n_equal_eps(delta_t: f64, eps: f64) -> Result<u64> {
    if !(delta_t > 0.0 && delta_t < 10.0) {
        return Err(Error::Domain {
            what: "delta_T",
            value: delta_t,
            domain: "(0, 10)",
        });
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
            domain: "(0, 1]",
        });
    }
    Ok(ceil_count((10.0 / delta_t).ln() / (2.0 * eps * eps)))
}

/// Unclamped `δ_T(N) = 2δ^Z + 2δ^X + δ^XZ` for real `N`.
pub fn ds_failure_probability(n: f64, eps_z: f64, eps_x: f64, eps_xz: f64) -> f64 {
    let d = |e: f64| 2.0 * (-2.0 * n * e * e).exp();
    2.0 * d(eps_z) + 2.0 * d(eps_x) + d(eps_xz)
}

/// Root of `f(N) = target` for decreasing `f`, to [`ROOT_REL_TOL`].
fn solve_decreasing<F: Fn(f64) -> f64>(f: F, target: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) > target {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    bisect(|n| f(n) > target, 0.0, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    /// Budget with the ceilinged triplet count.
    pub budget: ErrorBudget,
    /// Real-valued solution of `δ1 + δ2 + δ3 = δ_T`.
    pub n_real: f64,
    /// Coincidence probabilities at the planning state.
    pub p: CoincidenceProbabilities,
}

impl BudgetPlan {
    /// Noisy pairs consumed: three per triplet.
    pub fn total_pairs(&self) -> u64 {
        3 * self.budget.n
    }
}

fn width_x1(p: &CoincidenceProbabilities, e: f64) -> f64 {
    band_x1(p.p_z, e, 1).map(|b| b.eps).unwrap_or(f64::INFINITY)
}

fn width_x2(p: &CoincidenceProbabilities, e: f64) -> f64 {
    band_x2(p.p_x, e, 1).map(|b| b.eps).unwrap_or(f64::INFINITY)
}

fn width_x3(p: &CoincidenceProbabilities, eps_z: f64, eps_x: f64, eps_xz: f64) -> f64 {
    ErrorBudget::new(eps_z, eps_x, eps_xz, 1)
        .and_then(|b| band_x3(p, &b))
        .map(|b| b.eps)
        .unwrap_or(f64::INFINITY)
}

/// Largest coincidence error whose band width stays within `target`.
fn eps_for_width<F: Fn(f64) -> f64>(width: F, target: f64, what: &str) -> Result<f64> {
    if !(width(EPS_FLOOR) <= target) {
        return Err(Error::NoFeasibleBudget(format!(
            "{what}: width {:.3e} at eps = {EPS_FLOOR:e} already exceeds target {target:e}",
            width(EPS_FLOOR)
        )));
    }
    if width(EPS_CEIL) <= target {
        return Ok(EPS_CEIL);
    }
    Ok(bisect(|e| width(e) <= target, EPS_FLOOR, EPS_CEIL))
}

/// Coincidence errors and triplet count that meet the targets at the
/// planning state.
pub fn budget_for_targets(target: &PlanTarget) -> Result<BudgetPlan> {
    let p = coincidence_probs(&q_to_x(&target.planning_state)?)?;
    let [t1, t2, t3] = target.eps_targets;
    let eps_z = eps_for_width(|e| width_x1(&p, e), t1, "x1")?;
    let eps_x = eps_for_width(|e| width_x2(&p, e), t2, "x2")?;
    let eps_xz = eps_for_width(|e| width_x3(&p, eps_z, eps_x, e), t3, "x3")?;
    let n_real = solve_decreasing(
        |n| ds_failure_probability(n, eps_z, eps_x, eps_xz),
        target.delta_t,
    );
    if !n_real.is_finite() {
        return Err(Error::NoFeasibleBudget("triplet count diverges".into()));
    }
    Ok(BudgetPlan {
        budget: ErrorBudget::new(eps_z, eps_x, eps_xz, ceil_count(n_real))?,
        n_real,
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyPlan {
    /// Pairs measured in each of the three bases.
    pub n_per_basis: u64,
    pub n_real: f64,
}

impl TomographyPlan {
    pub fn total_pairs(&self) -> u64 {
        3 * self.n_per_basis
    }
}

/// `Σi 2·exp(−2Nεi²)` for per-basis count `N`.
pub fn tomography_failure_probability(n: f64, eps: [f64; 3]) -> f64 {
    eps.iter().map(|e| 2.0 * (-2.0 * n * e * e).exp()).sum()
}

/// Equal per-basis count for local `Z⊗Z`, `X⊗X`, `Y⊗Y` measurements.
pub fn tomography_n(target: &PlanTarget) -> Result<TomographyPlan> {
    let eps = target.eps_targets;
    let n_real = solve_decreasing(|n| tomography_failure_probability(n, eps), target.delta_t);
    if !n_real.is_finite() {
        return Err(Error::Domain {
            what: "delta_T",
            value: target.delta_t,
            domain: "reachable failure probability",
        });
    }
    Ok(TomographyPlan {
        n_per_basis: ceil_count(n_real),
        n_real,
    })
}

/// Grid over `(q1, q2)` with `q3 = q4 = (1 − q1 − q2)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub q1_min: f64,
    pub q1_max: f64,
    pub q2_min: f64,
    pub q2_max: f64,
    pub step: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            q1_min: 0.55,
            q1_max: 1.0,
            q2_min: 0.0,
            q2_max: 0.45,
            step: 0.05,
        }
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

impl ScanGrid {
    /// Grid points in row-major order (`q1` slow), keeping only those with
    /// `q1 > 1/2` and non-negative coefficients.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        if !(self.step > 0.0) || self.q1_max < self.q1_min || self.q2_max < self.q2_min {
            return Err(Error::Domain {
                what: "grid step",
                value: self.step,
                domain: "step > 0 and ordered ranges",
            });
        }
        let n1 = ((self.q1_max - self.q1_min) / self.step + 1e-9).floor() as usize;
        let n2 = ((self.q2_max - self.q2_min) / self.step + 1e-9).floor() as usize;
        let mut pts = Vec::new();
        for i in 0..=n1 {
            let q1 = round12(self.q1_min + i as f64 * self.step);
            if q1 <= 0.5 || q1 > 1.0 {
                continue;
            }
            for j in 0..=n2 {
                let q2 = round12(self.q2_min + j as f64 * self.step);
                if q2 < 0.0 || q1 + q2 > 1.0 + 1e-12 {
                    continue;
                }
                pts.push((q1, q2));
            }
        }
        Ok(pts)
    }
}

pub fn grid_state(q1: f64, q2: f64) -> Result<BellDiagonalState> {
    let rest = ((1.0 - q1 - q2) / 2.0).max(0.0);
    BellDiagonalState::new([q1, q2, rest, rest])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Infeasible,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub q1: f64,
    pub q2: f64,
    pub n_ds_total: Option<u64>,
    pub n_tom_total: Option<u64>,
    /// Ratio of the un-ceilinged totals.
    pub ratio: Option<f64>,
    pub status: CellStatus,
    /// Equal Pauli errors, `q2 = q3 = q4`.
    pub werner: bool,
}

/// Double selection versus tomography at one grid point.
pub fn scan_cell(q1: f64, q2: f64, eps_targets: [f64; 3], delta_t: f64) -> ScanCell {
    let rest = (1.0 - q1 - q2) / 2.0;
    let werner = (q2 - rest).abs() < 1e-9;
    let infeasible = ScanCell {
        q1,
        q2,
        n_ds_total: None,
        n_tom_total: None,
        ratio: None,
        status: CellStatus::Infeasible,
        werner,
    };
    let plans = grid_state(q1, q2)
        .and_then(|s| PlanTarget::new(delta_t, eps_targets, s))
        .and_then(|t| Ok((budget_for_targets(&t)?, tomography_n(&t)?)));
    match plans {
        Ok((ds, tom)) => ScanCell {
            n_ds_total: Some(ds.total_pairs()),
            n_tom_total: Some(tom.total_pairs()),
            ratio: Some((3.0 * ds.n_real) / (3.0 * tom.n_real)),
            status: CellStatus::Ok,
            ..infeasible
        },
        Err(_) => infeasible,
    }
}

/// Evaluates every grid cell in `range` (indices into [`ScanGrid::points`]).
/// Cells are independent; failures are recorded per cell.
pub fn ratio_scan_range(
    grid: &ScanGrid,
    eps_targets: [f64; 3],
    delta_t: f64,
    range: std::ops::Range<usize>,
) -> Result<Vec<ScanCell>> {
    let pts = grid.points()?;
    let end = range.end.min(pts.len());
    let start = range.start.min(end);
    let cells = &pts[start..end];
    #[cfg(feature = "parallel")]
    let out = cells
        .par_iter()
        .map(|&(q1, q2)| scan_cell(q1, q2, eps_targets, delta_t))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let out = cells
        .iter()
        .map(|&(q1, q2)| scan_cell(q1, q2, eps_targets, delta_t))
        .collect();
    Ok(out)
}

pub fn ratio_scan(grid: &ScanGrid, eps_targets: [f64; 3], delta_t: f64) -> Result<Vec<ScanCell>> {
    ratio_scan_range(grid, eps_targets, delta_t, 0..usize::MAX)
}
