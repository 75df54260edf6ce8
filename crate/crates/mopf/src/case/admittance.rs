//! Branch Pi-model admittance terms.

use thiserror::Error;

/// The eight real admittance coefficients of a branch two-port; see the
/// module docs of [`crate::case`] for the convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineAdmittance {
    /// Series coupling seen from the `from` end: `G_ij + jB_ij = -Yft`.
    pub g_from: f64,
    pub b_from: f64,
    /// Series coupling seen from the `to` end: `G_ji + jB_ji = -Ytf`.
    pub g_to: f64,
    pub b_to: f64,
    /// Self admittance at the `from` end: `Yff`.
    pub g_ff: f64,
    pub b_ff: f64,
    /// Self admittance at the `to` end: `Ytt`.
    pub g_tt: f64,
    pub b_tt: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum AdmittanceError {
    #[error("zero-impedance branch (r = x = 0)")]
    ZeroImpedance,
    #[error("tap ratio must be positive, got {0}")]
    BadTap(f64),
}

/// Derives the admittance terms of a branch from its raw parameters.
///
/// `r`, `x`, `b_charge` are per-unit; `tap` is the off-nominal ratio at the
/// `from` side (1.0 for none); `shift` is the phase shift in radians.
pub fn branch_admittance(
    r: f64,
    x: f64,
    b_charge: f64,
    tap: f64,
    shift: f64,
) -> Result<LineAdmittance, AdmittanceError> {
    let z2 = r * r + x * x;
    if z2 == 0.0 {
        return Err(AdmittanceError::ZeroImpedance);
    }
    if tap <= 0.0 {
        return Err(AdmittanceError::BadTap(tap));
    }
    let g = r / z2;
    let b = -x / z2;
    let (cs, sn) = (shift.cos(), shift.sin());
    // coupling_from = y e^{+j shift} / tap, coupling_to = y e^{-j shift} / tap
    let g_from = (g * cs - b * sn) / tap;
    let b_from = (g * sn + b * cs) / tap;
    let g_to = (g * cs + b * sn) / tap;
    let b_to = (-g * sn + b * cs) / tap;
    let t2 = tap * tap;
    Ok(LineAdmittance {
        g_from,
        b_from,
        g_to,
        b_to,
        g_ff: g / t2,
        b_ff: (b + b_charge / 2.0) / t2,
        g_tt: g,
        b_tt: b + b_charge / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_reactance_series_terms() {
        // r=0, x=1: series admittance -j, so B couplings are -1.
        let a = branch_admittance(0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(a.g_from, 0.0);
        assert_eq!(a.b_from, -1.0);
        assert_eq!(a.g_to, 0.0);
        assert_eq!(a.b_to, -1.0);
        assert_eq!(a.g_ff, 0.0);
        assert_eq!(a.b_ff, -1.0);
    }

    #[test]
    fn nominal_tap_is_symmetric() {
        let a = branch_admittance(0.01, 0.1, 0.04, 1.0, 0.0).unwrap();
        assert_eq!(a.g_from, a.g_to);
        assert_eq!(a.b_from, a.b_to);
        assert_eq!(a.g_ff, a.g_tt);
        assert_eq!(a.b_ff, a.b_tt);
    }

    #[test]
    fn textbook_pi_model_oracle() {
        // Independent complex-arithmetic evaluation of y = 1/(r+jx).
        let (r, x) = (0.01, 0.1);
        let denom = r * r + x * x;
        let (g_ref, b_ref) = (r / denom, -x / denom);
        let a = branch_admittance(r, x, 0.0, 1.0, 0.0).unwrap();
        assert!((a.g_from - g_ref).abs() < 1e-15);
        assert!((a.b_from - b_ref).abs() < 1e-15);
        assert!((g_ref - 0.990099009900990).abs() < 1e-12);
        assert!((b_ref + 9.90099009900990).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_tap() {
        assert_eq!(
            branch_admittance(0.0, 0.5, 0.0, 0.0, 0.0),
            Err(AdmittanceError::BadTap(0.0))
        );
    }

    #[test]
    fn rejects_zero_impedance() {
        assert_eq!(
            branch_admittance(0.0, 0.0, 0.1, 1.0, 0.0),
            Err(AdmittanceError::ZeroImpedance)
        );
    }
}
