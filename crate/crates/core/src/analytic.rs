//! Closed-form coincidence probabilities of one double selection round and
//! their inversions back to the transformed parameters `x`.

use serde::{Deserialize, Serialize};

use crate::bell::XVector;
use crate::error::{Error, Result};

/// Distance from a boundary of `[1/2, 1]` within which an inverted value is
/// snapped onto the boundary instead of being rejected.
pub const BOUNDARY_SNAP: f64 = 1e-9;

/// Coincidence probabilities `(p^Z, p^X, p^XZ)`: Z coincidence on the first
/// ancilla pair, X coincidence on the second, and both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceProbabilities {
    pub p_z: f64,
    pub p_x: f64,
    pub p_xz: f64,
}

impl CoincidenceProbabilities {
    pub fn new(p_z: f64, p_x: f64, p_xz: f64) -> Self {
        Self { p_z, p_x, p_xz }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_z, self.p_x, self.p_xz]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_unit(what: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "[0, 1]",
        })
    }
}

/// `p^Z = 3x1 − 6x1² + 4x1³`.
pub fn p_z(x1: f64) -> Result<f64> {
    check_unit("x1", x1)?;
    // Same polynomial written as 1/2 + y³/2 with y = 2x1 − 1, which is
    // exact in y and avoids cancellation near x1 = 1/2.
    let y = 2.0 * x1 - 1.0;
    Ok(0.5 + 0.5 * y * y * y)
}

/// `p^X = 1 − 2x2 + 2x2²`.
pub fn p_x(x2: f64) -> Result<f64> {
    check_unit("x2", x2)?;
    let y = 2.0 * x2 - 1.0;
    Ok(0.5 + 0.5 * y * y)
}

/// `p^XZ = 2x1 − 3x1² + 2x1³ − x2 + x2² + x3 − 2x1x3 − x3² + 2x1x3²`.
pub fn p_xz(x: &XVector) -> Result<f64> {
    let XVector { x1, x2, x3 } = *x;
    check_unit("x1", x1)?;
    check_unit("x2", x2)?;
    check_unit("x3", x3)?;
    // Expanded in y_i = 2x_i − 1 the polynomial factors as
    // (1 + y1³ + y2² + y1·y3²) / 4, which keeps round-off at a few ulp.
    let (y1, y2, y3) = (2.0 * x1 - 1.0, 2.0 * x2 - 1.0, 2.0 * x3 - 1.0);
    Ok(0.25 * (1.0 + y1 * y1 * y1 + y2 * y2 + y1 * y3 * y3))
}

/// All three probabilities at `x`.
pub fn coincidence_probs(x: &XVector) -> Result<CoincidenceProbabilities> {
    Ok(CoincidenceProbabilities::new(p_z(x.x1)?, p_x(x.x2)?, p_xz(x)?))
}

/// Accepts values in `[1/2, 1]`, snapping those within [`BOUNDARY_SNAP`]
/// outside onto the boundary.
fn snap(param: &'static str, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::InversionDomain {
            param,
            reason: format!("non-finite value {v}"),
        });
    }
    if v > 1.0 {
        if v - 1.0 <= BOUNDARY_SNAP {
            return Ok(1.0);
        }
        return Err(Error::InversionDomain {
            param,
            reason: format!("value {v} exceeds 1"),
        });
    }
    if v < 0.5 {
        if 0.5 - v <= BOUNDARY_SNAP {
            return Ok(0.5);
        }
        return Err(Error::InversionDomain {
            param,
            reason: format!("value {v} below 1/2"),
        });
    }
    Ok(v)
}

/// Inverse of [`p_z`] on `(1/2, 1]`.
pub fn invert_x1(p_z: f64) -> Result<f64> {
    if !(p_z > 0.5) {
        return Err(Error::InversionDomain {
            param: "x1",
            reason: format!("p_z = {p_z} is not above 1/2"),
        });
    }
    snap("x1", x1_formula(p_z))
}

/// Inverse of [`p_x`] on `(1/2, 1]`.
pub fn invert_x2(p_x: f64) -> Result<f64> {
    if !(p_x > 0.5) {
        return Err(Error::InversionDomain {
            param: "x2",
            reason: format!("p_x = {p_x} is not above 1/2"),
        });
    }
    snap("x2", x2_formula(p_x))
}

/// Recovers `x3` from all three probabilities. Requires `p_z > 1/2` and a
/// non-negative radicand; the result must land in `[1/2, 1]` after snapping.
pub fn invert_x3(p: &CoincidenceProbabilities) -> Result<f64> {
    snap("x3", x3_formula(p)?)
}

/// `x1 = (1 + (2p − 1)^{1/3}) / 2` with the real cube root. Total on reals;
/// callers decide which inputs are admissible.
pub(crate) fn x1_formula(p_z: f64) -> f64 {
    0.5 * (1.0 + (2.0 * p_z - 1.0).cbrt())
}

/// `x2 = (1 + (2p − 1)^{1/2}) / 2`, NaN for a negative radicand.
pub(crate) fn x2_formula(p_x: f64) -> f64 {
    0.5 * (1.0 + (2.0 * p_x - 1.0).sqrt())
}

/// Unchecked-range version of [`invert_x3`]: the value may exceed 1.
pub(crate) fn x3_formula(p: &CoincidenceProbabilities) -> Result<f64> {
    let denom = (2.0 * p.p_z - 1.0).cbrt();
    if !(denom > 0.0) {
        return Err(Error::InversionDomain {
            param: "x3",
            reason: format!("p_z = {} is not above 1/2", p.p_z),
        });
    }
    let numer = 4.0 * p.p_xz - 2.0 * p.p_z - 2.0 * p.p_x + 1.0;
    let radicand = numer / denom;
    if !(radicand >= 0.0) {
        return Err(Error::InversionDomain {
            param: "x3",
            reason: format!("negative radicand {radicand}"),
        });
    }
    Ok(0.5 * (1.0 + radicand.sqrt()))
}

/// Inverts all three probabilities, requiring each result in `[1/2, 1]`.
pub fn invert(p: &CoincidenceProbabilities) -> Result<XVector> {
    Ok(XVector::new(
        invert_x1(p.p_z)?,
        invert_x2(p.p_x)?,
        invert_x3(p)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn factored_forms_match_expanded_polynomials() {
        let grid = (0..=20).map(|i| i as f64 / 20.0);
        for x1 in grid.clone() {
            let expanded_z = 3.0 * x1 - 6.0 * x1 * x1 + 4.0 * x1 * x1 * x1;
            assert_abs_diff_eq!(p_z(x1).unwrap(), expanded_z, epsilon = 1e-14);
            assert_abs_diff_eq!(p_x(x1).unwrap(), 1.0 - 2.0 * x1 + 2.0 * x1 * x1, epsilon = 1e-14);
            for x2 in grid.clone() {
                for x3 in grid.clone() {
                    let expanded = 2.0 * x1 - 3.0 * x1 * x1 + 2.0 * x1.powi(3) - x2 + x2 * x2 + x3
                        - 2.0 * x1 * x3
                        - x3 * x3
                        + 2.0 * x1 * x3 * x3;
                    let got = p_xz(&XVector::new(x1, x2, x3)).unwrap();
                    assert_abs_diff_eq!(got, expanded, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn forward_examples() {
        assert_eq!(p_z(1.0).unwrap(), 1.0);
        assert_eq!(p_z(0.5).unwrap(), 0.5);
        assert_abs_diff_eq!(p_z(0.77).unwrap(), 0.578732, epsilon = 1e-14);
        assert_eq!(p_x(1.0).unwrap(), 1.0);
        assert_eq!(p_x(0.5).unwrap(), 0.5);
        assert_abs_diff_eq!(p_x(0.67).unwrap(), 0.5578, epsilon = 1e-14);
        assert_eq!(p_xz(&XVector::new(1.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            p_xz(&XVector::new(0.5, 0.5, 0.5)).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            p_xz(&XVector::new(0.77, 0.67, 0.80)).unwrap(),
            0.366866,
            epsilon = 1e-14
        );
    }

    #[test]
    fn forward_domain_errors() {
        assert!(p_z(1.1).is_err());
        assert!(p_x(-0.1).is_err());
        assert!(p_xz(&XVector::new(0.5, 0.5, 1.5)).is_err());
        assert!(p_z(f64::NAN).is_err());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(invert_x1(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(invert_x1(0.578732).unwrap(), 0.77, epsilon = 1e-12);
        assert!(matches!(invert_x1(0.5), Err(Error::InversionDomain { .. })));

        assert_eq!(invert_x2(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(invert_x2(0.5578).unwrap(), 0.67, epsilon = 1e-12);
        assert!(matches!(invert_x2(0.4), Err(Error::InversionDomain { .. })));

        let one = CoincidenceProbabilities::new(1.0, 1.0, 1.0);
        assert_eq!(invert_x3(&one).unwrap(), 1.0);
        let p = CoincidenceProbabilities::new(0.578732, 0.5578, 0.366866);
        assert_abs_diff_eq!(invert_x3(&p).unwrap(), 0.80, epsilon = 1e-12);
        let bad = CoincidenceProbabilities::new(0.6, 0.6, 0.20);
        assert!(matches!(
            invert_x3(&bad),
            Err(Error::InversionDomain { param: "x3", .. })
        ));
    }

    #[test]
    fn x3_rejects_values_above_one() {
        // radicand (4 - 1.8 - 2 + 1) / 0.8^{1/3} > 1
        let p = CoincidenceProbabilities::new(0.9, 1.0, 1.0);
        assert!(x3_formula(&p).unwrap() > 1.0);
        assert!(invert_x3(&p).is_err());
    }

    #[test]
    fn snap_boundaries() {
        assert_eq!(snap("x", 1.0 + 5e-10).unwrap(), 1.0);
        assert!(snap("x", 1.0 + 2e-9).is_err());
        assert_eq!(snap("x", 0.5 - 5e-10).unwrap(), 0.5);
        assert!(snap("x", 0.49).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for i in 0..50 {
            let x = 0.5 + 0.01 * i as f64;
            let lo = (x - h).max(0.0);
            let hi = (x + h).min(1.0);
            let fd_z = (p_z(hi).unwrap() - p_z(lo).unwrap()) / (hi - lo);
            let fd_x = (p_x(hi).unwrap() - p_x(lo).unwrap()) / (hi - lo);
            assert_abs_diff_eq!(fd_z, 3.0 * (2.0 * x - 1.0).powi(2), epsilon = 1e-6);
            assert_abs_diff_eq!(fd_x, 2.0 * (2.0 * x - 1.0), epsilon = 1e-6);
        }
    }
}
