//! Repeated simulate→estimate trials and trace-distance histograms.

use serde::{Deserialize, Serialize};

use crate::bell::{trace_distance, BellDiagonalState};
use crate::engine::run_sequential;
use crate::error::{Error, Result};
use crate::estimator::{estimate, Estimation};
use crate::rng::derive_seed;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub seed: u64,
    /// `None` when the estimator took its failure branch.
    pub distance: Option<f64>,
    pub eps_t: Option<f64>,
    pub delta_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramResult {
    pub trials: Vec<TrialOutcome>,
    /// Distances of the successful trials, in trial order.
    pub distances: Vec<f64>,
    pub failures: u64,
    pub mean: f64,
    /// Sample standard deviation (`T − 1` denominator).
    pub std: f64,
    pub bin_edges: Vec<f64>,
    pub bin_counts: Vec<u64>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Bin edges by the Freedman–Diaconis rule, width `2·IQR·T^(−1/3)`. A zero
/// IQR or zero range gives a single bin.
pub fn freedman_diaconis_edges(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return vec![0.0, 0.0];
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr * (sorted.len() as f64).powf(-1.0 / 3.0);
    let range = max - min;
    if !(width > 0.0) || !(range > 0.0) {
        return vec![min, max];
    }
    let bins = ((range / width).ceil() as usize).max(1);
    (0..=bins)
        .map(|k| if k == bins { max } else { min + range * k as f64 / bins as f64 })
        .collect()
}

/// Counts per bin; the last bin is closed on the right.
pub fn bin_counts(xs: &[f64], edges: &[f64]) -> Vec<u64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let (lo, hi) = (edges[0], edges[bins]);
    for &x in xs {
        let k = if hi > lo {
            (((x - lo) / (hi - lo)) * bins as f64).floor() as usize
        } else {
            0
        };
        counts[k.min(bins - 1)] += 1;
    }
    counts
}

fn run_trial(state: &BellDiagonalState, n: u64, master_seed: u64, trial: u64, eps: [f64; 3]) -> Result<TrialOutcome> {
    let seed = derive_seed(master_seed, trial);
    let summary = run_sequential(state, n, seed)?;
    Ok(match estimate(&summary, eps)? {
        Estimation::Success(r) => TrialOutcome {
            trial,
            seed,
            distance: Some(trace_distance(&r.q_hat, state)),
            eps_t: Some(r.eps_t),
            delta_t: Some(r.delta_t),
        },
        Estimation::Failure(_) => TrialOutcome {
            trial,
            seed,
            distance: None,
            eps_t: None,
            delta_t: None,
        },
    })
}

/// Runs `trials` independent estimations of `state` from `n` triplets each.
/// Trial `t` uses the seed derived from `(master_seed, t)`.
pub fn run_trials(
    state: &BellDiagonalState,
    n: u64,
    trials: u64,
    master_seed: u64,
    eps: [f64; 3],
) -> Result<Vec<TrialOutcome>> {
    state.check_normalized()?;
    #[cfg(feature = "parallel")]
    let out: Result<Vec<_>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(state, n, master_seed, t, eps))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let out: Result<Vec<_>> = (0..trials)
        .map(|t| run_trial(state, n, master_seed, t, eps))
        .collect();
    out
}

pub fn histogram(
    state: &BellDiagonalState,
    n: u64,
    trials: u64,
    master_seed: u64,
    eps: [f64; 3],
) -> Result<HistogramResult> {
    if trials < 2 {
        return Err(Error::Domain {
            what: "trials",
            value: trials as f64,
            domain: "trials >= 2",
        });
    }
    let outcomes = run_trials(state, n, trials, master_seed, eps)?;
    Ok(summarize(outcomes))
}

pub fn summarize(trials: Vec<TrialOutcome>) -> HistogramResult {
    let distances: Vec<f64> = trials.iter().filter_map(|t| t.distance).collect();
    let failures = (trials.len() - distances.len()) as u64;
    let (mean, std) = mean_std(&distances);
    let bin_edges = freedman_diaconis_edges(&distances);
    let bin_counts = bin_counts(&distances, &bin_edges);
    HistogramResult {
        trials,
        distances,
        failures,
        mean,
        std,
        bin_edges,
        bin_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fd_width() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        // IQR = 50, width = 100 / 101^(1/3) ≈ 21.5 → 5 bins
        let e = freedman_diaconis_edges(&xs);
        assert_eq!(e.len(), 6);
        assert_eq!(e[0], 0.0);
        assert_eq!(*e.last().unwrap(), 100.0);
        assert_eq!(bin_counts(&xs, &e).iter().sum::<u64>(), 101);
    }

    #[test]
    fn degenerate_single_bin() {
        let xs = vec![0.0; 10];
        let e = freedman_diaconis_edges(&xs);
        assert_eq!(e, vec![0.0, 0.0]);
        assert_eq!(bin_counts(&xs, &e), vec![10]);
        // Zero IQR but non-zero range.
        let mut ys = vec![1.0; 9];
        ys.push(5.0);
        assert_eq!(freedman_diaconis_edges(&ys).len(), 2);
    }

    #[test]
    fn mean_std_small() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn perfect_state_gives_zero_distances() {
        let h = histogram(&BellDiagonalState::perfect(), 1000, 8, 3, [0.01; 3]).unwrap();
        assert_eq!(h.failures, 0);
        assert!(h.distances.iter().all(|&d| d == 0.0));
        assert_eq!(h.bin_counts, vec![8]);
        assert_eq!(h.mean, 0.0);
    }

    #[test]
    fn needs_two_trials() {
        assert!(histogram(&BellDiagonalState::perfect(), 10, 1, 0, [0.01; 3]).is_err());
    }
}
