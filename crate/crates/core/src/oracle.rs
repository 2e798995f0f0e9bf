//! Exact model of one double selection round at the Pauli-frame level.
//!
//! Three identical pairs carry independent Bell labels. Both parties apply a
//! CNOT from pair 0 onto pair 1 and from pair 2 onto pair 1, measure pair 1
//! in Z and pair 2 in X, and keep pair 0 when both measurements coincide.
//! On frame bits a bilateral CNOT copies the flip bit control → target and
//! the phase bit target → control.

use std::io::Write;

use crate::analytic::CoincidenceProbabilities;
use crate::bell::{BellDiagonalState, BellLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTriple {
    pub labels: [BellLabel; 3],
}

impl FrameTriple {
    pub fn new(l0: BellLabel, l1: BellLabel, l2: BellLabel) -> Self {
        Self {
            labels: [l0, l1, l2],
        }
    }

    /// All 64 triples, pair 0 slowest, in the fixed label order.
    pub fn all() -> impl Iterator<Item = FrameTriple> {
        (0..64).map(|k| {
            FrameTriple::new(
                BellLabel::from_index(k >> 4),
                BellLabel::from_index((k >> 2) & 3),
                BellLabel::from_index(k & 3),
            )
        })
    }

    pub fn weight(&self, state: &BellDiagonalState) -> f64 {
        let q = state.coefficients();
        self.labels.iter().map(|l| q[l.index()]).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOutcome {
    pub z_coincide: bool,
    pub x_coincide: bool,
    /// Frame of pair 0 after the gates; meaningful when both coincide.
    pub survivor: BellLabel,
}

impl RoundOutcome {
    pub fn passed(&self) -> bool {
        self.z_coincide && self.x_coincide
    }
}

fn bilateral_cnot(frames: &mut [BellLabel; 3], control: usize, target: usize) {
    frames[target].flip ^= frames[control].flip;
    frames[control].phase ^= frames[target].phase;
}

pub fn propagate(frame: &FrameTriple) -> RoundOutcome {
    let mut f = frame.labels;
    bilateral_cnot(&mut f, 0, 1);
    bilateral_cnot(&mut f, 2, 1);
    RoundOutcome {
        z_coincide: !f[1].flip,
        x_coincide: !f[2].phase,
        survivor: f[0],
    }
}

/// Exact `(p^Z, p^X, p^XZ)` as weighted sums over the 64 triples.
pub fn enumerate_coincidence_probs(state: &BellDiagonalState) -> Result<CoincidenceProbabilities> {
    state.check_normalized()?;
    let (mut pz, mut px, mut pxz) = (0.0, 0.0, 0.0);
    for triple in FrameTriple::all() {
        let w = triple.weight(state);
        let out = propagate(&triple);
        if out.z_coincide {
            pz += w;
        }
        if out.x_coincide {
            px += w;
        }
        if out.passed() {
            pxz += w;
        }
    }
    Ok(CoincidenceProbabilities::new(pz, px, pxz))
}

/// Bell-diagonal part of the post-selected pair and the success weight
/// `π^XZ`, i.e. `N(ρ)/Tr N(ρ)` and `Tr N(ρ)` for the round's instrument.
///
/// For Bell-diagonal inputs `π^XZ` coincides with `p^XZ`.
pub fn distilled_map(state: &BellDiagonalState) -> Result<(BellDiagonalState, f64)> {
    state.check_normalized()?;
    let mut out = [0.0; 4];
    for triple in FrameTriple::all() {
        let o = propagate(&triple);
        if o.passed() {
            out[o.survivor.index()] += triple.weight(state);
        }
    }
    let pi_xz: f64 = out.iter().sum();
    if !(pi_xz > 0.0) {
        return Err(Error::DegenerateMap);
    }
    for v in out.iter_mut() {
        *v /= pi_xz;
    }
    Ok((BellDiagonalState::from_raw(out), pi_xz))
}

fn monomial(triple: &FrameTriple) -> String {
    triple
        .labels
        .iter()
        .map(|l| format!("q{}", l.index() + 1))
        .collect::<Vec<_>>()
        .join("*")
}

/// Writes the 64-row truth table as CSV:
/// `pair0,pair1,pair2,weight,z_coincide,x_coincide,survivor`.
pub fn write_truth_table<W: Write>(mut w: W) -> std::io::Result<()> {
    writeln!(w, "pair0,pair1,pair2,weight,z_coincide,x_coincide,survivor")?;
    for triple in FrameTriple::all() {
        let o = propagate(&triple);
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            triple.labels[0].name(),
            triple.labels[1].name(),
            triple.labels[2].name(),
            monomial(&triple),
            o.z_coincide as u8,
            o.x_coincide as u8,
            if o.passed() { o.survivor.name() } else { "-" },
        )?;
    }
    Ok(())
}
