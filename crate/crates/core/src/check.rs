//! Differential check: closed-form probabilities vs frame enumeration vs
//! statevector simulation on random states.

use serde::{Deserialize, Serialize};

use crate::analytic::{coincidence_probs, CoincidenceProbabilities};
use crate::bell::{q_to_x, BellDiagonalState};
use crate::error::Result;
use crate::oracle::enumerate_coincidence_probs;
use crate::rng::Stream;
use crate::statevector::statevector_probs;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const ORACLE_TOL: f64 = 1e-12;
const MAX_REPORTED: usize = 10;

/// Uniform (flat Dirichlet) random state for index `i` of a seeded batch.
pub fn random_state(seed: u64, i: u64) -> BellDiagonalState {
    let mut s = Stream::for_index(seed, i);
    let w: [f64; 4] = std::array::from_fn(|_| -(1.0 - s.next_f64()).ln());
    let total: f64 = w.iter().sum();
    let mut q = w.map(|v| v / total);
    q[3] = 1.0 - q[0] - q[1] - q[2];
    BellDiagonalState::from_raw(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub index: u64,
    pub q: [f64; 4],
    pub analytic: CoincidenceProbabilities,
    pub enumerated: CoincidenceProbabilities,
    pub statevector: CoincidenceProbabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub states: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub max_analytic_vs_enumeration: f64,
    pub max_enumeration_vs_statevector: f64,
    pub mismatch_count: u64,
    /// First few offending states.
    pub mismatches: Vec<Mismatch>,
    pub passed: bool,
}

struct Row {
    d_ae: f64,
    d_es: f64,
    mismatch: Option<Mismatch>,
}

fn check_one<F>(analytic: &F, seed: u64, i: u64) -> Result<Row>
where
    F: Fn(&BellDiagonalState) -> Result<CoincidenceProbabilities>,
{
    let q = random_state(seed, i);
    let a = analytic(&q)?;
    let e = enumerate_coincidence_probs(&q)?;
    let s = statevector_probs(&q)?;
    let (d_ae, d_es) = (a.max_abs_diff(&e), e.max_abs_diff(&s));
    let bad = !(d_ae < ORACLE_TOL && d_es < ORACLE_TOL);
    Ok(Row {
        d_ae,
        d_es,
        mismatch: bad.then(|| Mismatch {
            index: i,
            q: q.coefficients(),
            analytic: a,
            enumerated: e,
            statevector: s,
        }),
    })
}

/// Runs the check with a caller-supplied closed-form model.
pub fn oracle_check_with<F>(states: u64, seed: u64, analytic: F) -> Result<OracleCheckReport>
where
    F: Fn(&BellDiagonalState) -> Result<CoincidenceProbabilities> + Sync,
{
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<Row>> = (0..states)
        .into_par_iter()
        .map(|i| check_one(&analytic, seed, i))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<Row>> = (0..states).map(|i| check_one(&analytic, seed, i)).collect();
    let rows = rows?;

    let mut report = OracleCheckReport {
        states,
        seed,
        tolerance: ORACLE_TOL,
        max_analytic_vs_enumeration: 0.0,
        max_enumeration_vs_statevector: 0.0,
        mismatch_count: 0,
        mismatches: Vec::new(),
        passed: true,
    };
    for row in rows {
        report.max_analytic_vs_enumeration = report.max_analytic_vs_enumeration.max(row.d_ae);
        report.max_enumeration_vs_statevector =
            report.max_enumeration_vs_statevector.max(row.d_es);
        if let Some(m) = row.mismatch {
            report.mismatch_count += 1;
            report.passed = false;
            if report.mismatches.len() < MAX_REPORTED {
                report.mismatches.push(m);
            }
        }
    }
    Ok(report)
}

pub fn analytic_probs(state: &BellDiagonalState) -> Result<CoincidenceProbabilities> {
    coincidence_probs(&q_to_x(state)?)
}

pub fn oracle_check(states: u64, seed: u64) -> Result<OracleCheckReport> {
    oracle_check_with(states, seed, analytic_probs)
}
