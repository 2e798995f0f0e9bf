//! Bell-diagonal states and the exact algebra on their coefficients.
//!
//! A state is stored by its coefficients in the fixed label order
//! `(Φ⁺, Φ⁻, Ψ⁺, Ψ⁻)`. The transformed vector `x` has `x_i = q_1 + q_{i+1}`,
//! which turns two of the three coincidence probabilities into
//! single-variable functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ q_k = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Slack allowed on each coefficient leaving `[0, 1]`.
const COMPONENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonalState {
    q: [f64; 4],
}

impl BellDiagonalState {
    /// Validated constructor: normalized and every coefficient in `[0, 1]`.
    pub fn new(q: [f64; 4]) -> Result<Self> {
        let state = Self { q };
        state.check_normalized()?;
        for (k, &v) in q.iter().enumerate() {
            if !(-COMPONENT_TOL..=1.0 + COMPONENT_TOL).contains(&v) {
                return Err(Error::Domain {
                    what: ["q1", "q2", "q3", "q4"][k],
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        Ok(state)
    }

    /// Wraps raw coefficients without any check. Estimates produced by
    /// [`x_to_q`] go through here and may be non-physical.
    pub fn from_raw(q: [f64; 4]) -> Self {
        Self { q }
    }

    pub fn perfect() -> Self {
        Self { q: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn maximally_mixed() -> Self {
        Self { q: [0.25; 4] }
    }

    /// Werner state with fidelity `q1` and equally likely Pauli errors.
    pub fn werner(q1: f64) -> Result<Self> {
        let r = (1.0 - q1) / 3.0;
        Self::new([q1, r, r, r])
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.q
    }

    pub fn fidelity(&self) -> f64 {
        self.q[0]
    }

    pub fn check_normalized(&self) -> Result<()> {
        let sum: f64 = self.q.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized {
                sum,
                tol: NORMALIZATION_TOL,
            });
        }
        Ok(())
    }

    /// Normalized with all coefficients in `[0, 1]`.
    pub fn is_physical(&self) -> bool {
        self.check_normalized().is_ok()
            && self
                .q
                .iter()
                .all(|v| (-COMPONENT_TOL..=1.0 + COMPONENT_TOL).contains(v))
    }

    /// Physical and `q1 > 1/2`, the regime in which the estimator applies.
    pub fn is_admissible(&self) -> bool {
        self.is_physical() && self.q[0] > 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XVector {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl XVector {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    /// Every component in `(1/2, 1]`.
    pub fn is_admissible(&self) -> bool {
        self.as_array().iter().all(|&x| x > 0.5 && x <= 1.0)
    }
}

/// Pauli-frame label of a Bell pair.
///
/// `phase` is set for Φ⁻ and Ψ⁻, `flip` for Ψ⁺ and Ψ⁻, so that
/// `P(flip = 0) = x1`, `P(phase = 0) = x2` and `P(phase = flip) = x3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BellLabel {
    pub phase: bool,
    pub flip: bool,
}

impl BellLabel {
    pub const PHI_PLUS: Self = Self::new(false, false);
    pub const PHI_MINUS: Self = Self::new(true, false);
    pub const PSI_PLUS: Self = Self::new(false, true);
    pub const PSI_MINUS: Self = Self::new(true, true);

    /// Fixed enumeration order, matching the coefficient order of
    /// [`BellDiagonalState`].
    pub const ALL: [Self; 4] = [
        Self::PHI_PLUS,
        Self::PHI_MINUS,
        Self::PSI_PLUS,
        Self::PSI_MINUS,
    ];

    pub const fn new(phase: bool, flip: bool) -> Self {
        Self { phase, flip }
    }

    /// Position in [`BellLabel::ALL`].
    pub fn index(self) -> usize {
        match (self.phase, self.flip) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => 3,
        }
    }

    pub fn from_index(k: usize) -> Self {
        Self::ALL[k]
    }

    pub fn name(self) -> &'static str {
        ["Phi+", "Phi-", "Psi+", "Psi-"][self.index()]
    }
}

pub fn q_to_x(state: &BellDiagonalState) -> Result<XVector> {
    state.check_normalized()?;
    let [q1, q2, q3, q4] = state.q;
    Ok(XVector::new(q1 + q2, q1 + q3, q1 + q4))
}

/// Inverse of [`q_to_x`]. Never clamps; inconsistent `x` yields a
/// non-physical state.
pub fn x_to_q(x: &XVector) -> BellDiagonalState {
    let XVector { x1, x2, x3 } = *x;
    BellDiagonalState::from_raw([
        (-1.0 + x1 + x2 + x3) / 2.0,
        (1.0 + x1 - x2 - x3) / 2.0,
        (1.0 - x1 + x2 - x3) / 2.0,
        (1.0 - x1 - x2 + x3) / 2.0,
    ])
}

/// Half the ℓ1 distance between coefficient vectors, which is the trace
/// distance for two Bell-diagonal states.
pub fn trace_distance(a: &BellDiagonalState, b: &BellDiagonalState) -> f64 {
    0.5 * a
        .q
        .iter()
        .zip(b.q.iter())
        .map(|(u, v)| (u - v).abs())
        .sum::<f64>()
}

/// Pauli correlators `(t_X, t_Y, t_Z)` with `ρ = (I⊗I + Σ t_σ σ⊗σ)/4`.
pub fn correlators(state: &BellDiagonalState) -> (f64, f64, f64) {
    let [q1, q2, q3, q4] = state.q;
    (q1 - q2 + q3 - q4, -q1 + q2 + q3 - q4, q1 + q2 - q3 - q4)
}
