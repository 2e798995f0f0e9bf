//! Monte Carlo generation of double selection measurement records.

use serde::{Deserialize, Serialize};

use crate::analytic::CoincidenceProbabilities;
use crate::bell::{BellDiagonalState, BellLabel};
use crate::error::{Error, Result};
use crate::oracle::{propagate, FrameTriple};
use crate::rng::Stream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Records handled per work unit. Counts are integer sums, so the chunking
/// does not affect results.
const CHUNK: u64 = 4096;

/// Outcome of one consumed triplet of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub z_coincide: bool,
    pub x_coincide: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub n: u64,
    pub z: u64,
    pub x: u64,
    pub xz: u64,
}

impl Counts {
    fn push(&mut self, r: TripletRecord) {
        self.n += 1;
        self.z += r.z_coincide as u64;
        self.x += r.x_coincide as u64;
        self.xz += (r.z_coincide && r.x_coincide) as u64;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            z: self.z + o.z,
            x: self.x + o.x,
            xz: self.xz + o.xz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: u64,
    pub count_z: u64,
    pub count_x: u64,
    pub count_xz: u64,
    pub p_hat: CoincidenceProbabilities,
    pub master_seed: Option<u64>,
}

impl RunSummary {
    pub fn from_counts(
        n: u64,
        count_z: u64,
        count_x: u64,
        count_xz: u64,
        master_seed: Option<u64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::MalformedSummary("n = 0".into()));
        }
        if count_z > n || count_x > n || count_xz > count_z.min(count_x) {
            return Err(Error::MalformedSummary(format!(
                "inconsistent counts z={count_z} x={count_x} xz={count_xz} for n={n}"
            )));
        }
        let nf = n as f64;
        Ok(Self {
            n,
            count_z,
            count_x,
            count_xz,
            p_hat: CoincidenceProbabilities::new(
                count_z as f64 / nf,
                count_x as f64 / nf,
                count_xz as f64 / nf,
            ),
            master_seed,
        })
    }

    /// Aggregates an externally supplied record sequence.
    pub fn from_records<'a, I>(records: I, master_seed: Option<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TripletRecord>,
    {
        let mut c = Counts::default();
        for r in records {
            c.push(*r);
        }
        Self::from_counts(c.n, c.z, c.x, c.xz, master_seed)
    }

    /// Re-checks the count invariants (for summaries built by hand or
    /// deserialized).
    pub fn validate(&self) -> Result<()> {
        let fresh =
            Self::from_counts(self.n, self.count_z, self.count_x, self.count_xz, self.master_seed)?;
        if fresh.p_hat.max_abs_diff(&self.p_hat) > 1e-12 {
            return Err(Error::MalformedSummary(
                "p_hat does not match counts / n".into(),
            ));
        }
        Ok(())
    }
}

/// Inverse-CDF draw over the fixed label order.
#[inline]
fn sample_label(q: &[f64; 4], u: f64) -> BellLabel {
    let mut acc = 0.0;
    for (k, &p) in q.iter().enumerate().take(3) {
        acc += p;
        if u < acc {
            return BellLabel::from_index(k);
        }
    }
    BellLabel::PSI_MINUS
}

/// Draws three i.i.d. labels and runs them through the round.
pub fn sample_record(state: &BellDiagonalState, stream: &mut Stream) -> TripletRecord {
    let q = state.coefficients();
    let triple = FrameTriple::new(
        sample_label(&q, stream.next_f64()),
        sample_label(&q, stream.next_f64()),
        sample_label(&q, stream.next_f64()),
    );
    let out = propagate(&triple);
    TripletRecord {
        z_coincide: out.z_coincide,
        x_coincide: out.x_coincide,
    }
}

/// Record `index` of the run seeded by `master_seed`.
pub fn record_at(state: &BellDiagonalState, master_seed: u64, index: u64) -> TripletRecord {
    sample_record(state, &mut Stream::for_index(master_seed, index))
}

fn chunk_counts(state: &BellDiagonalState, master_seed: u64, start: u64, end: u64) -> Counts {
    let mut c = Counts::default();
    for i in start..end {
        c.push(record_at(state, master_seed, i));
    }
    c
}

fn check_run_args(state: &BellDiagonalState, n: u64) -> Result<()> {
    state.check_normalized()?;
    if !state.is_physical() {
        return Err(Error::Domain {
            what: "state",
            value: state.fidelity(),
            domain: "physical Bell-diagonal states",
        });
    }
    if n == 0 {
        return Err(Error::Domain {
            what: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    Ok(())
}

fn summarize(c: Counts, master_seed: u64) -> RunSummary {
    RunSummary::from_counts(c.n, c.z, c.x, c.xz, Some(master_seed))
        .expect("engine counts satisfy the summary invariants")
}

/// Single-threaded reference path.
pub fn run_sequential(state: &BellDiagonalState, n: u64, master_seed: u64) -> Result<RunSummary> {
    check_run_args(state, n)?;
    let c = (0..n.div_ceil(CHUNK))
        .map(|k| chunk_counts(state, master_seed, k * CHUNK, ((k + 1) * CHUNK).min(n)))
        .fold(Counts::default(), Counts::merge);
    Ok(summarize(c, master_seed))
}

/// Fans chunks of record indices out over the rayon pool.
#[cfg(feature = "parallel")]
pub fn run_parallel(state: &BellDiagonalState, n: u64, master_seed: u64) -> Result<RunSummary> {
    check_run_args(state, n)?;
    let c = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| chunk_counts(state, master_seed, k * CHUNK, ((k + 1) * CHUNK).min(n)))
        .reduce(Counts::default, Counts::merge);
    Ok(summarize(c, master_seed))
}

/// Simulates `n` triplets. Output is a pure function of
/// `(state, n, master_seed)`.
pub fn run(state: &BellDiagonalState, n: u64, master_seed: u64) -> Result<RunSummary> {
    #[cfg(feature = "parallel")]
    {
        run_parallel(state, n, master_seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sequential(state, n, master_seed)
    }
}

/// Materializes the records of a run, in index order.
pub fn generate_records(
    state: &BellDiagonalState,
    n: u64,
    master_seed: u64,
) -> Result<Vec<TripletRecord>> {
    check_run_args(state, n)?;
    #[cfg(feature = "parallel")]
    {
        Ok((0..n)
            .into_par_iter()
            .map(|i| record_at(state, master_seed, i))
            .collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..n).map(|i| record_at(state, master_seed, i)).collect())
    }
}
