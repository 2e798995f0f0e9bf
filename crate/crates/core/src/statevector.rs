//! Dense statevector model of the round, independent of the frame rules in
//! [`crate::oracle`]. Six qubits `A0 A1 A2 B0 B1 B2` (bit `k` of the basis
//! index is qubit `k`); each Bell-label triple is simulated as a pure state
//! and the results are mixed with the triple's weight.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::analytic::CoincidenceProbabilities;
use crate::bell::{BellDiagonalState, BellLabel};
use crate::error::Result;

const A: [usize; 3] = [0, 1, 2];
const B: [usize; 3] = [3, 4, 5];

type Amplitudes = [f64; 64];

fn bit(idx: usize, q: usize) -> usize {
    (idx >> q) & 1
}

/// Amplitude of `|α β⟩` in the Bell state with the given label.
fn bell_amplitude(label: BellLabel, alice: usize, bob: usize) -> f64 {
    let flip = label.flip as usize;
    if alice == 0 && bob == flip {
        FRAC_1_SQRT_2
    } else if alice == 1 && bob == 1 ^ flip {
        if label.phase {
            -FRAC_1_SQRT_2
        } else {
            FRAC_1_SQRT_2
        }
    } else {
        0.0
    }
}

fn product_state(labels: [BellLabel; 3]) -> Amplitudes {
    let mut psi = [0.0; 64];
    for (idx, amp) in psi.iter_mut().enumerate() {
        *amp = (0..3)
            .map(|k| bell_amplitude(labels[k], bit(idx, A[k]), bit(idx, B[k])))
            .product();
    }
    psi
}

fn cnot(psi: &mut Amplitudes, control: usize, target: usize) {
    for idx in 0..64 {
        if bit(idx, control) == 1 && bit(idx, target) == 0 {
            psi.swap(idx, idx | (1 << target));
        }
    }
}

fn hadamard(psi: &mut Amplitudes, q: usize) {
    for idx in 0..64 {
        if bit(idx, q) == 0 {
            let j = idx | (1 << q);
            let (a, b) = (psi[idx], psi[j]);
            psi[idx] = (a + b) * FRAC_1_SQRT_2;
            psi[j] = (a - b) * FRAC_1_SQRT_2;
        }
    }
}

struct Branch {
    p_z: f64,
    p_x: f64,
    p_xz: f64,
    /// Unnormalized Bell populations of pair 0 on the passing outcomes.
    survivor: [f64; 4],
}

fn simulate_triple(labels: [BellLabel; 3]) -> Branch {
    let mut psi = product_state(labels);
    cnot(&mut psi, A[0], A[1]);
    cnot(&mut psi, B[0], B[1]);
    cnot(&mut psi, A[2], A[1]);
    cnot(&mut psi, B[2], B[1]);
    // X-basis readout of pair 2.
    hadamard(&mut psi, A[2]);
    hadamard(&mut psi, B[2]);

    let mut branch = Branch {
        p_z: 0.0,
        p_x: 0.0,
        p_xz: 0.0,
        survivor: [0.0; 4],
    };
    for (idx, amp) in psi.iter().enumerate() {
        let prob = amp * amp;
        let z = bit(idx, A[1]) == bit(idx, B[1]);
        let x = bit(idx, A[2]) == bit(idx, B[2]);
        if z {
            branch.p_z += prob;
        }
        if x {
            branch.p_x += prob;
        }
        if z && x {
            branch.p_xz += prob;
        }
    }

    // Project pair 0 onto the Bell basis for every passing readout of the
    // ancilla qubits.
    let ancilla_mask = !((1 << A[0]) | (1 << B[0])) & 63;
    for rest in 0..64usize {
        if rest & !ancilla_mask != 0 {
            continue;
        }
        if bit(rest, A[1]) != bit(rest, B[1]) || bit(rest, A[2]) != bit(rest, B[2]) {
            continue;
        }
        for (k, label) in BellLabel::ALL.iter().enumerate() {
            let mut overlap = 0.0;
            for alice in 0..2 {
                for bob in 0..2 {
                    let idx = rest | (alice << A[0]) | (bob << B[0]);
                    overlap += bell_amplitude(*label, alice, bob) * psi[idx];
                }
            }
            branch.survivor[k] += overlap * overlap;
        }
    }
    branch
}

fn simulate(state: &BellDiagonalState) -> Result<([f64; 3], [f64; 4])> {
    state.check_normalized()?;
    let q = state.coefficients();
    let mut probs = [0.0; 3];
    let mut survivor = [0.0; 4];
    for k in 0..64 {
        let idx = [k >> 4, (k >> 2) & 3, k & 3];
        let w: f64 = idx.iter().map(|&i| q[i]).product();
        if w == 0.0 {
            continue;
        }
        let b = simulate_triple(idx.map(BellLabel::from_index));
        probs[0] += w * b.p_z;
        probs[1] += w * b.p_x;
        probs[2] += w * b.p_xz;
        for (s, v) in survivor.iter_mut().zip(b.survivor) {
            *s += w * v;
        }
    }
    Ok((probs, survivor))
}

/// Coincidence probabilities computed by unitary evolution and projective
/// measurement.
pub fn statevector_probs(state: &BellDiagonalState) -> Result<CoincidenceProbabilities> {
    let (p, _) = simulate(state)?;
    Ok(CoincidenceProbabilities::new(p[0], p[1], p[2]))
}

/// Unnormalized Bell populations of the kept pair after post-selection; their
/// sum is the success weight.
pub fn statevector_distilled(state: &BellDiagonalState) -> Result<[f64; 4]> {
    Ok(simulate(state)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bell_states_are_normalized() {
        for label in BellLabel::ALL {
            let norm: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |b| bell_amplitude(label, a, b).powi(2)))
                .sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn trivial_states() {
        let p = statevector_probs(&BellDiagonalState::perfect()).unwrap();
        for (g, w) in p.as_array().iter().zip([1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-14);
        }
        let p = statevector_probs(&BellDiagonalState::maximally_mixed()).unwrap();
        for (g, w) in p.as_array().iter().zip([0.5, 0.5, 0.25]) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_branches_match_frame_rules() {
        use crate::oracle::{propagate, FrameTriple};
        for triple in FrameTriple::all() {
            let b = simulate_triple(triple.labels);
            let o = propagate(&triple);
            assert_abs_diff_eq!(b.p_z, o.z_coincide as u8 as f64, epsilon = 1e-14);
            assert_abs_diff_eq!(b.p_x, o.x_coincide as u8 as f64, epsilon = 1e-14);
            if o.passed() {
                assert_abs_diff_eq!(b.survivor[o.survivor.index()], 1.0, epsilon = 1e-14);
            } else {
                assert_abs_diff_eq!(b.survivor.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
            }
        }
    }

    /// A phase-error heavy state whose fidelity drops after the round.
    #[test]
    fn fidelity_can_drop_for_phase_heavy_states() {
        let q = BellDiagonalState::new([0.5399, 0.3834, 0.0065, 0.0702]).unwrap();
        let joint = statevector_distilled(&q).unwrap();
        let total: f64 = joint.iter().sum();
        let (out, pi) = crate::oracle::distilled_map(&q).unwrap();
        for (a, b) in joint.iter().zip(out.coefficients()) {
            assert_abs_diff_eq!(a / total, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(total, pi, epsilon = 1e-12);
        assert!(out.fidelity() < 0.5399);
    }
}
