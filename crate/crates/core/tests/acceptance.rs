//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::time::{Duration, Instant};

use dsdistimator::analytic::{coincidence_probs, invert};
use dsdistimator::bell::trace_distance;
use dsdistimator::check::{oracle_check, random_state};
use dsdistimator::cli::run_cli;
use dsdistimator::engine::run;
use dsdistimator::estimator::{estimate, Estimation};
use dsdistimator::histogram::histogram;
use dsdistimator::oracle::{distilled_map, enumerate_coincidence_probs};
use dsdistimator::planner::{n_equal_eps, ratio_scan, scan_cell, CellStatus, ScanGrid};
use dsdistimator::rng::{derive_seed, Stream};
use dsdistimator::{BellDiagonalState, XVector};

const MIXED: [f64; 4] = [0.62, 0.15, 0.05, 0.18];
const HIGH_FIDELITY: [f64; 4] = [0.88, 0.02, 0.05, 0.05];
const REFERENCE_TARGETS: [f64; 3] = [1e-3, 1e-3, 5e-3];
const REFERENCE_DELTA: f64 = 1e-2;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let r = oracle_check(10_000, 2024).expect("oracle check runs");
    let elapsed = start.elapsed();
    outcome(
        r.passed
            && r.max_analytic_vs_enumeration < 1e-12
            && r.max_enumeration_vs_statevector < 1e-12
            && elapsed < Duration::from_secs(60),
        format!(
            "10^4 states, max |analytic-enum| = {:.2e}, max |enum-statevector| = {:.2e}, {:.2?}",
            r.max_analytic_vs_enumeration, r.max_enumeration_vs_statevector, elapsed
        ),
    )
}

fn inversion_round_trip() -> Outcome {
    let mut s = Stream::new(derive_seed(77, 0));
    let mut worst: f64 = 0.0;
    let mut worst_x = XVector::new(1.0, 1.0, 1.0);
    let mut over = 0;
    let mut errors = 0;
    for _ in 0..10_000 {
        // Uniform on (1/2, 1].
        let mut draw = || 1.0 - 0.5 * s.next_f64();
        let x = XVector::new(draw(), draw(), draw());
        let p = coincidence_probs(&x).expect("forward");
        match invert(&p) {
            Ok(back) => {
                let err = back
                    .as_array()
                    .iter()
                    .zip(x.as_array())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if err > 1e-10 {
                    over += 1;
                }
                if err > worst {
                    worst = err;
                    worst_x = x;
                }
            }
            Err(_) => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst <= 1e-10,
        format!(
            "10^4 admissible x, max error {worst:.2e} at x = ({:.6}, {:.6}, {:.6}), \
             {over} draws above 1e-10, inversion errors {errors}",
            worst_x.x1, worst_x.x2, worst_x.x3
        ),
    )
}

fn histogram_stats(q: [f64; 4], seed: u64) -> dsdistimator::histogram::HistogramResult {
    let state = BellDiagonalState::new(q).unwrap();
    histogram(&state, 10_000, 1000, seed, [0.01; 3]).expect("histogram")
}

fn histogram_mixed() -> Outcome {
    let h = histogram_stats(MIXED, 31);
    outcome(
        h.failures == 0 && (0.006..=0.014).contains(&h.mean) && (0.002..=0.006).contains(&h.std),
        format!(
            "mean {:.5} in [0.006, 0.014], std {:.5} in [0.002, 0.006], failures {}",
            h.mean, h.std, h.failures
        ),
    )
}

fn histogram_high_fidelity() -> Outcome {
    let h = histogram_stats(HIGH_FIDELITY, 32);
    let below = h.distances.iter().filter(|&&d| d <= 0.010).count() as f64
        / h.distances.len() as f64;
    outcome(
        h.failures == 0
            && (0.002..=0.005).contains(&h.mean)
            && (0.0005..=0.002).contains(&h.std)
            && below >= 0.99,
        format!(
            "mean {:.5} in [0.002, 0.005], std {:.5} in [0.0005, 0.002], P(D <= 0.010) = {:.4}",
            h.mean, h.std, below
        ),
    )
}

fn certificate_soundness() -> Outcome {
    let state = BellDiagonalState::new(MIXED).unwrap();
    let trials = 2000u64;
    let (mut exceed, mut delta_t, mut failed) = (0u64, 0.0f64, 0u64);
    for t in 0..trials {
        let summary = run(&state, 10_000, derive_seed(5, t)).unwrap();
        match estimate(&summary, [0.01; 3]).unwrap() {
            Estimation::Success(r) => {
                if trace_distance(&r.q_hat, &state) >= r.eps_t {
                    exceed += 1;
                }
                delta_t = delta_t.max(r.delta_t);
            }
            // Failure reports D bound 1, δ_T = 1.
            Estimation::Failure(_) => {
                failed += 1;
                delta_t = 1.0;
            }
        }
    }
    let frac = exceed as f64 / trials as f64;
    let sigma = (delta_t * (1.0 - delta_t) / trials as f64).sqrt();
    outcome(
        frac <= delta_t + 3.0 * sigma,
        format!(
            "{trials} trials, P(D >= eps_T) = {frac:.4} <= delta_T {delta_t:.4} + 3 sigma {:.4} (failures {failed})",
            3.0 * sigma
        ),
    )
}

fn equal_eps_closed_form() -> Outcome {
    let n = n_equal_eps(0.01, 1e-3).unwrap();
    let ratios: Vec<f64> = [1e-3, 2e-3, 5e-3]
        .iter()
        .map(|&e| n_equal_eps(0.01, e).unwrap() as f64 / n_equal_eps(0.01, 2.0 * e).unwrap() as f64)
        .collect();
    outcome(
        n == 3_453_878 && ratios.iter().all(|r| (3.99..=4.01).contains(r)),
        format!("N(0.01, 1e-3) = {n}, N(eps)/N(2eps) = {ratios:.5?}"),
    )
}

fn resource_ratio() -> Outcome {
    let cells = ratio_scan(&ScanGrid::default(), REFERENCE_TARGETS, REFERENCE_DELTA).unwrap();
    let high: Vec<_> = cells.iter().filter(|c| c.q1 >= 0.9 - 1e-12).collect();
    let high_ok = !high.is_empty()
        && high
            .iter()
            .all(|c| c.status == CellStatus::Ok && c.ratio.unwrap() <= 1.5);
    let worst_high = high.iter().filter_map(|c| c.ratio).fold(0.0, f64::max);

    // Werner line q2 = q3 = q4, walked from q1 = 1 down to 0.55.
    let werner: Vec<(f64, Option<f64>)> = (0..=9)
        .map(|k| {
            let q1 = 1.0 - 0.05 * k as f64;
            (q1, scan_cell(q1, (1.0 - q1) / 3.0, REFERENCE_TARGETS, REFERENCE_DELTA).ratio)
        })
        .collect();
    let increasing = werner.iter().all(|(_, r)| r.is_some())
        && werner
            .windows(2)
            .all(|w| w[1].1.unwrap() > w[0].1.unwrap());
    let infeasible = cells.iter().filter(|c| c.status != CellStatus::Ok).count();
    outcome(
        high_ok && increasing,
        format!(
            "{} cells ({} infeasible), max ratio for q1 >= 0.9: {:.3}; Werner ratios {:?}",
            cells.len(),
            infeasible,
            worst_high,
            werner
                .iter()
                .map(|(q1, r)| format!("{q1:.2}:{:.3}", r.unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
        ),
    )
}

fn distillation_improvement() -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    let mut first: Option<([f64; 4], f64)> = None;
    let mut i = 0u64;
    while checked < 1000 {
        let state = random_state(99, i);
        i += 1;
        if !state.is_admissible() {
            continue;
        }
        checked += 1;
        let (out, pi) = distilled_map(&state).unwrap();
        let p = enumerate_coincidence_probs(&state).unwrap();
        let q1 = state.fidelity();
        let ok = out.fidelity() >= q1
            && (!(q1 > 0.5 && q1 < 1.0) || out.fidelity() > q1)
            && (pi - p.p_xz).abs() < 1e-14;
        if !ok {
            violations += 1;
            first.get_or_insert((state.coefficients(), out.fidelity()));
        }
    }
    outcome(
        violations == 0,
        match first {
            None => format!("{checked} admissible states, no violations"),
            Some((q, f)) => format!(
                "{checked} admissible states, {violations} violations; first q = {q:.4?} gives q_out,1 = {f:.4}"
            ),
        },
    )
}

fn determinism() -> Outcome {
    let base = tempfile::tempdir().unwrap();
    let run_with = |name: &str, threads: &str| {
        let dir = base.path().join(name);
        let code = run_cli([
            "dsdistimator",
            "histogram",
            "--q",
            "0.62,0.15,0.05,0.18",
            "--n",
            "10000",
            "--trials",
            "100",
            "--seed",
            "12345",
            "--threads",
            threads,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        ["distances.csv", "histogram.csv", "summary.json"]
            .map(|f| fs::read(dir.join(f)).unwrap())
    };
    let a = run_with("a", "1");
    let b = run_with("b", "1");
    let c = run_with("c", "4");
    let d = run_with("d", "0");
    outcome(
        a == b && a == c && a == d,
        "histogram outputs byte-identical across repeated runs and 1/4/default workers".into(),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 inversion round trip", inversion_round_trip),
        ("3 histogram statistics, mixed state", histogram_mixed),
        ("4 histogram statistics, high-fidelity state", histogram_high_fidelity),
        ("5 certificate soundness", certificate_soundness),
        ("6 equal-error sample complexity", equal_eps_closed_form),
        ("7 resource ratio vs tomography", resource_ratio),
        ("8 distillation improves fidelity", distillation_improvement),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        println!(
            "[{}] criterion {name}: {} ({:.1?})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
