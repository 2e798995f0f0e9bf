//! Command-line front end. Every command can read its parameters from a
//! JSON config (`--config`); flags given on the command line win.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bell::BellDiagonalState;
use crate::check::{analytic_probs, oracle_check};
use crate::engine::{generate_records, RunSummary};
use crate::error::{Error, Result};
use crate::estimator::{distilled_estimate, estimate, Estimation, EstimationFailure, REPORT_SCHEMA_VERSION};
use crate::histogram::histogram;
use crate::oracle::{enumerate_coincidence_probs, write_truth_table};
use crate::planner::{
    budget_for_targets, n_equal_eps, ratio_scan_range, tomography_n, PlanTarget, ScanGrid,
};
use crate::records::{export_records, import_records, RecordMeta, RECORD_SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ESTIMATION_FAILURE: i32 = 2;
pub const EXIT_INFEASIBLE_PLAN: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_ORACLE_MISMATCH: i32 = 5;

const DEFAULT_SEED: u64 = 0x5eed;
const DEFAULT_EPS: [f64; 3] = [0.01; 3];

#[derive(Debug, Parser)]
#[command(name = "dsdistimator", version, about = "Double selection distillation estimator toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form vs enumerated coincidence probabilities for one state.
    Probe {
        #[arg(long, value_parser = parse_q)]
        q: Option<[f64; 4]>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a round and write the record file.
    Simulate {
        #[arg(long, value_parser = parse_q)]
        q: Option<[f64; 4]>,
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the state from a simulated run or a record file.
    Estimate {
        #[arg(long, value_parser = parse_q)]
        q: Option<[f64; 4]>,
        #[arg(long)]
        n: Option<u64>,
        /// Record CSV to estimate from instead of simulating.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Coincidence errors `eps_z,eps_x,eps_xz`.
        #[arg(long, value_parser = parse_triple)]
        eps: Option<[f64; 3]>,
        /// Also estimate the distilled pair.
        #[arg(long)]
        distilled: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Trace-distance histogram over repeated trials.
    Histogram {
        #[arg(long, value_parser = parse_q)]
        q: Option<[f64; 4]>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, value_parser = parse_triple)]
        eps: Option<[f64; 3]>,
        /// Worker threads (0 = rayon default).
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Plan a triplet budget.
    Plan {
        /// Failure probability target.
        #[arg(long)]
        delta: Option<f64>,
        /// Equal coincidence error for the closed-form plan.
        #[arg(long)]
        eps_equal: Option<f64>,
        /// Targets `eps1,eps2,eps3` for the per-parameter plan.
        #[arg(long, value_parser = parse_triple)]
        targets: Option<[f64; 3]>,
        #[arg(long, value_parser = parse_q)]
        q: Option<[f64; 4]>,
        #[command(flatten)]
        common: Common,
    },
    /// Resource ratio against tomography over a (q1, q2) grid.
    Scan {
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, value_parser = parse_triple)]
        targets: Option<[f64; 3]>,
        #[arg(long)]
        delta: Option<f64>,
        /// Cell index range `start:end` for resumable runs.
        #[arg(long)]
        cells: Option<String>,
        /// Append to an existing scan.csv instead of overwriting.
        #[arg(long)]
        append: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Differential test of the three probability models.
    OracleCheck {
        #[arg(long)]
        states: Option<u64>,
        /// Also write the 64-row frame truth table.
        #[arg(long)]
        truth_table: bool,
        #[command(flatten)]
        common: Common,
    },
}

/// Fields of a JSON experiment config. Unused fields are ignored by
/// commands that do not need them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub q: Option<[f64; 4]>,
    pub n: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub eps: Option<[f64; 3]>,
    pub eps_targets: Option<[f64; 3]>,
    pub eps_equal: Option<f64>,
    pub delta_t: Option<f64>,
    pub grid: Option<ScanGrid>,
    pub cells: Option<String>,
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub distilled: Option<bool>,
    pub states: Option<u64>,
    pub threads: Option<usize>,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated values, got {}", v.len()))
}

fn parse_q(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_range(s: &str) -> Result<std::ops::Range<usize>> {
    let bad = || Error::Domain {
        what: "cells",
        value: f64::NAN,
        domain: "start:end",
    };
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let start = if a.is_empty() { 0 } else { a.parse().map_err(|_| bad())? };
    let end = if b.is_empty() { usize::MAX } else { b.parse().map_err(|_| bad())? };
    Ok(start..end)
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => ExperimentConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn require_state(q: Option<[f64; 4]>) -> Result<BellDiagonalState> {
    let q = q.ok_or(Error::Domain {
        what: "q",
        value: f64::NAN,
        domain: "a state given by --q or the config",
    })?;
    BellDiagonalState::new(q)
}

/// Formats with 12 significant digits, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=12).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r: f64 = format!("{x:.11e}").parse().unwrap();
            *v = json!(r);
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), text)?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_probe(q: Option<[f64; 4]>, common: &Common) -> Result<i32> {
    let cfg = load_config(common)?;
    let state = require_state(q.or(cfg.q))?;
    let analytic = analytic_probs(&state)?;
    let enumerated = enumerate_coincidence_probs(&state)?;
    let report = json!({
        "q": state.coefficients(),
        "analytic": analytic,
        "enumerated": enumerated,
        "max_abs_diff": analytic.max_abs_diff(&enumerated),
    });
    emit(cfg.out.as_deref(), "probe.json", &to_json_string(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(q: Option<[f64; 4]>, n: Option<u64>, common: &Common) -> Result<i32> {
    let cfg = load_config(common)?;
    let state = require_state(q.or(cfg.q))?;
    let n = n.or(cfg.n).unwrap_or(10_000);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let out = cfg.out.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let records = generate_records(&state, n, seed)?;
    let meta = RecordMeta {
        n,
        master_seed: Some(seed),
        q: Some(state.coefficients()),
        schema_version: RECORD_SCHEMA_VERSION,
    };
    export_records(&out.join("records.csv"), &records, &meta)?;
    let summary = RunSummary::from_records(&records, Some(seed))?;
    println!("{}", to_json_string(&summary)?.trim_end());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct EstimateInput {
    n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<[f64; 4]>,
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    schema_version: u32,
    input: EstimateInput,
    summary: RunSummary,
    result: Estimation,
    #[serde(skip_serializing_if = "Option::is_none")]
    distilled: Option<Value>,
}

fn cmd_estimate(
    q: Option<[f64; 4]>,
    n: Option<u64>,
    records: Option<PathBuf>,
    eps: Option<[f64; 3]>,
    distilled: bool,
    common: &Common,
) -> Result<i32> {
    let cfg = load_config(common)?;
    let eps = eps.or(cfg.eps).unwrap_or(DEFAULT_EPS);
    let (summary, input) = match records.or(cfg.records.clone()) {
        Some(path) => {
            let (recs, meta) = import_records(&path)?;
            let seed = meta.as_ref().and_then(|m| m.master_seed);
            let summary = RunSummary::from_records(&recs, seed)?;
            let input = EstimateInput {
                n: summary.n,
                master_seed: seed,
                q: meta.and_then(|m| m.q),
            };
            (summary, input)
        }
        None => {
            let state = require_state(q.or(cfg.q))?;
            let n = n.or(cfg.n).unwrap_or(10_000);
            let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
            let summary = crate::engine::run(&state, n, seed)?;
            let input = EstimateInput {
                n,
                master_seed: Some(seed),
                q: Some(state.coefficients()),
            };
            (summary, input)
        }
    };
    let result = estimate(&summary, eps)?;
    let distilled = match (&result, distilled || cfg.distilled.unwrap_or(false)) {
        (Estimation::Success(r), true) => Some(match distilled_estimate(r) {
            Ok(d) => serde_json::to_value(d)?,
            Err(Error::NotCertifiable { margin }) => {
                json!({ "status": "not_certifiable", "margin": margin })
            }
            Err(e) => return Err(e),
        }),
        _ => None,
    };
    let failed = matches!(result, Estimation::Failure(_));
    let output = EstimateOutput {
        schema_version: REPORT_SCHEMA_VERSION,
        input,
        summary,
        result,
        distilled,
    };
    emit(cfg.out.as_deref(), "report.json", &to_json_string(&output)?)?;
    if failed {
        eprintln!("{}", EstimationFailure::MESSAGE);
        return Ok(EXIT_ESTIMATION_FAILURE);
    }
    Ok(EXIT_OK)
}

/// Writes `distances.csv`, `histogram.csv` and `summary.json` into `out`.
pub fn write_histogram_outputs(
    out: &Path,
    state: &BellDiagonalState,
    n: u64,
    trials: u64,
    seed: u64,
    eps: [f64; 3],
    h: &crate::histogram::HistogramResult,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut d = String::from("trial,seed,distance,status\n");
    for t in &h.trials {
        match t.distance {
            Some(v) => d += &format!("{},{},{},ok\n", t.trial, t.seed, sig12(v)),
            None => d += &format!("{},{},,failed\n", t.trial, t.seed),
        }
    }
    fs::write(out.join("distances.csv"), d)?;

    let mut b = String::from("bin_lo,bin_hi,count\n");
    for (k, c) in h.bin_counts.iter().enumerate() {
        b += &format!("{},{},{}\n", sig12(h.bin_edges[k]), sig12(h.bin_edges[k + 1]), c);
    }
    fs::write(out.join("histogram.csv"), b)?;

    let summary = json!({
        "q": state.coefficients(),
        "n": n,
        "trials": trials,
        "seed": seed,
        "eps": eps,
        "successes": h.distances.len(),
        "failures": h.failures,
        "mean": h.mean,
        "std": h.std,
        "bins": h.bin_counts.len(),
    });
    fs::write(out.join("summary.json"), to_json_string(&summary)?)?;
    Ok(())
}

fn cmd_histogram(
    q: Option<[f64; 4]>,
    n: Option<u64>,
    trials: Option<u64>,
    eps: Option<[f64; 3]>,
    threads: Option<usize>,
    common: &Common,
) -> Result<i32> {
    let cfg = load_config(common)?;
    let state = require_state(q.or(cfg.q))?;
    let n = n.or(cfg.n).unwrap_or(10_000);
    let trials = trials.or(cfg.trials).unwrap_or(1000);
    let eps = eps.or(cfg.eps).unwrap_or(DEFAULT_EPS);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let threads = threads.or(cfg.threads).unwrap_or(0);
    let h = with_threads(threads, || histogram(&state, n, trials, seed, eps))?;
    write_histogram_outputs(&out, &state, n, trials, seed, eps, &h)?;
    eprintln!(
        "mean {} std {} failures {}",
        sig12(h.mean),
        sig12(h.std),
        h.failures
    );
    Ok(EXIT_OK)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: usize, f: F) -> T {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T, F: FnOnce() -> T>(_threads: usize, f: F) -> T {
    f()
}

fn cmd_plan(
    delta: Option<f64>,
    eps_equal: Option<f64>,
    targets: Option<[f64; 3]>,
    q: Option<[f64; 4]>,
    common: &Common,
) -> Result<i32> {
    let cfg = load_config(common)?;
    let delta_t = delta.or(cfg.delta_t).unwrap_or(1e-2);
    let out = cfg.out.as_deref();
    if let Some(e) = eps_equal.or(cfg.eps_equal) {
        let n = n_equal_eps(delta_t, e)?;
        let report = json!({ "mode": "equal_eps", "delta_t": delta_t, "eps": e, "n": n, "total_pairs": 3 * n });
        emit(out, "plan.json", &to_json_string(&report)?)?;
        return Ok(EXIT_OK);
    }
    let state = require_state(q.or(cfg.q))?;
    let targets = targets.or(cfg.eps_targets).unwrap_or([1e-3, 1e-3, 5e-3]);
    let target = PlanTarget::new(delta_t, targets, state)?;
    let tom = tomography_n(&target)?;
    match budget_for_targets(&target) {
        Ok(plan) => {
            let report = json!({
                "mode": "targets",
                "target": target,
                "budget": plan.budget,
                "n_real": plan.n_real,
                "ds_total_pairs": plan.total_pairs(),
                "tomography": tom,
                "tomography_total_pairs": tom.total_pairs(),
                "ratio": plan.n_real / tom.n_real,
            });
            emit(out, "plan.json", &to_json_string(&report)?)?;
            Ok(EXIT_OK)
        }
        Err(Error::NoFeasibleBudget(why)) => {
            let report = json!({ "mode": "targets", "target": target, "status": "infeasible", "reason": why });
            emit(out, "plan.json", &to_json_string(&report)?)?;
            eprintln!("infeasible plan: {why}");
            Ok(EXIT_INFEASIBLE_PLAN)
        }
        Err(e) => Err(e),
    }
}

pub const SCAN_HEADER: &str = "q1,q2,n_ds_total,n_tom_total,ratio,status";

fn cmd_scan(
    step: Option<f64>,
    targets: Option<[f64; 3]>,
    delta: Option<f64>,
    cells: Option<String>,
    append: bool,
    common: &Common,
) -> Result<i32> {
    let cfg = load_config(common)?;
    let mut grid = cfg.grid.unwrap_or_default();
    if let Some(s) = step {
        grid.step = s;
    }
    let targets = targets.or(cfg.eps_targets).unwrap_or([1e-3, 1e-3, 5e-3]);
    let delta_t = delta.or(cfg.delta_t).unwrap_or(1e-2);
    let range = match cells.or(cfg.cells) {
        Some(s) => parse_range(&s)?,
        None => 0..usize::MAX,
    };
    let rows = ratio_scan_range(&grid, targets, delta_t, range)?;
    let mut text = String::new();
    if !append {
        text += SCAN_HEADER;
        text.push('\n');
    }
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &rows {
        text += &format!(
            "{},{},{},{},{},{}\n",
            sig12(c.q1),
            sig12(c.q2),
            opt(c.n_ds_total),
            opt(c.n_tom_total),
            c.ratio.map(sig12).unwrap_or_default(),
            c.status.as_str()
        );
    }
    let out = cfg.out.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let path = out.join("scan.csv");
    if append && path.exists() {
        fs::OpenOptions::new().append(true).open(&path)?.write_all(text.as_bytes())?;
    } else {
        if append {
            text = format!("{SCAN_HEADER}\n{text}");
        }
        fs::write(&path, text)?;
    }
    let infeasible = rows.iter().filter(|c| c.ratio.is_none()).count();
    eprintln!("{} cells, {} infeasible", rows.len(), infeasible);
    Ok(EXIT_OK)
}

fn cmd_oracle_check(states: Option<u64>, truth_table: bool, common: &Common) -> Result<i32> {
    let cfg = load_config(common)?;
    let states = states.or(cfg.states).unwrap_or(10_000);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let report = oracle_check(states, seed)?;
    emit(cfg.out.as_deref(), "oracle_check.json", &to_json_string(&report)?)?;
    if truth_table {
        let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        write_truth_table(fs::File::create(dir.join("truth_table.csv"))?)?;
    }
    if !report.passed {
        for m in &report.mismatches {
            eprintln!("mismatch at state {} q = {:?}", m.index, m.q);
        }
        return Ok(EXIT_ORACLE_MISMATCH);
    }
    Ok(EXIT_OK)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NoFeasibleBudget(_) => EXIT_INFEASIBLE_PLAN,
        _ => EXIT_IO,
    }
}

pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Probe { q, common } => cmd_probe(q, &common),
        Command::Simulate { q, n, common } => cmd_simulate(q, n, &common),
        Command::Estimate {
            q,
            n,
            records,
            eps,
            distilled,
            common,
        } => cmd_estimate(q, n, records, eps, distilled, &common),
        Command::Histogram {
            q,
            n,
            trials,
            eps,
            threads,
            common,
        } => cmd_histogram(q, n, trials, eps, threads, &common),
        Command::Plan {
            delta,
            eps_equal,
            targets,
            q,
            common,
        } => cmd_plan(delta, eps_equal, targets, q, &common),
        Command::Scan {
            step,
            targets,
            delta,
            cells,
            append,
            common,
        } => cmd_scan(step, targets, delta, cells, append, &common),
        Command::OracleCheck {
            states,
            truth_table,
            common,
        } => cmd_oracle_check(states, truth_table, &common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Parses arguments and runs; returns the process exit code. Usage errors
/// map to the I/O/schema code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
