//! Exact residuals of the linearization and the norms used to bound them.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{conj_mat, conj_vec, im_vec, norm2, re_vec};
use crate::netmodel::{AdmittancePartition, NetworkCase};

/// Allowed disagreement between the complex and expanded real evaluations,
/// relative to `max(1, ‖Y‖† ‖ΔV‖²)`.
pub const DUAL_PATH_TOL: f64 = 1e-12;

/// `‖A‖† = max_ℓ (Σ_k |a_ℓk|²)^½`.
pub fn dagger_norm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    /// `value ≤ bound + slack`.
    pub fn new(name: impl Into<String>, value: f64, bound: f64, slack: f64) -> Self {
        BoundCheck { name: name.into(), value, bound, satisfied: value <= bound + slack }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub s_hot: DVector<Complex64>,
    pub p_hot: DVector<f64>,
    pub q_hot: DVector<f64>,
    pub s_norm: f64,
    pub p_norm: f64,
    pub q_norm: f64,
    pub bounds: Vec<BoundCheck>,
}

/// `S_h.o.t. = diag(ΔV) Y* ΔV*`, evaluated both as a complex product and
/// through the expanded `G`/`B` forms of its real and imaginary parts.
///
/// Always attaches the generic bound `‖S_h.o.t.‖ ≤ ‖Y*‖† ‖ΔV‖²`.
pub fn compute_shot(p: &AdmittancePartition, dv: &DVector<Complex64>) -> Result<ResidualReport> {
    if dv.len() != p.n() {
        return Err(Error::DimensionMismatch(format!("ΔV has length {}, expected {}", dv.len(), p.n())));
    }
    let s_hot = dv.component_mul(&(conj_mat(&p.y) * conj_vec(dv)));

    let g = p.g();
    let b = p.b();
    let (x, y) = (re_vec(dv), im_vec(dv));
    let gx_by = &g * &x - &b * &y;
    let gy_bx = &g * &y + &b * &x;
    let p_hot = x.component_mul(&gx_by) + y.component_mul(&gy_bx);
    let q_hot = y.component_mul(&gx_by) - x.component_mul(&gy_bx);

    let y_dagger = dagger_norm(&p.y);
    let dv_norm = norm2(dv);
    let scale = 1.0_f64.max(y_dagger * dv_norm * dv_norm);
    let worst = (0..p.n())
        .map(|i| (s_hot[i].re - p_hot[i]).abs().max((s_hot[i].im - q_hot[i]).abs()))
        .fold(0.0, f64::max);
    if worst > DUAL_PATH_TOL * scale {
        return Err(Error::InternalConsistency(format!(
            "complex and expanded residuals differ by {worst:.3e}"
        )));
    }
    // Report the expanded values as exact projections of the complex product.
    let p_hot = re_vec(&s_hot);
    let q_hot = im_vec(&s_hot);

    let s_norm = norm2(&s_hot);
    let bound = y_dagger * dv_norm * dv_norm;
    Ok(ResidualReport {
        p_norm: p_hot.norm(),
        q_norm: q_hot.norm(),
        s_norm,
        bounds: vec![BoundCheck::new("s_hot_quadratic", s_norm, bound, 1e-12)],
        s_hot,
        p_hot,
        q_hot,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundVerification {
    /// `‖diag(x) A x‖`
    pub quadratic_lhs: f64,
    /// `‖A‖† ‖x‖²`
    pub quadratic_rhs: f64,
    /// `‖A x‖`
    pub linear_lhs: f64,
    /// `‖A‖† ‖x‖`
    pub linear_rhs: f64,
    pub both_hold: bool,
}

/// Relative rounding allowance for [`verify_bounds`].
pub const BOUND_RTOL: f64 = 1e-12;

/// Checks `‖diag(x)Ax‖ ≤ ‖A‖†‖x‖²` and `‖Ax‖ ≤ ‖A‖†‖x‖`. The first always
/// holds. The second only bounds the largest entry of `Ax`; its 2-norm can
/// exceed `‖A‖†‖x‖` by up to `√N`, e.g. for the all-ones matrix.
pub fn verify_bounds(x: &DVector<Complex64>, a: &DMatrix<Complex64>) -> BoundVerification {
    let ax = a * x;
    let dagger = dagger_norm(a);
    let xn = norm2(x);
    let quadratic_lhs = norm2(&x.component_mul(&ax));
    let quadratic_rhs = dagger * xn * xn;
    let linear_lhs = norm2(&ax);
    let linear_rhs = dagger * xn;
    let both_hold = quadratic_lhs <= quadratic_rhs * (1.0 + BOUND_RTOL)
        && linear_lhs <= linear_rhs * (1.0 + BOUND_RTOL);
    BoundVerification { quadratic_lhs, quadratic_rhs, linear_lhs, linear_rhs, both_hold }
}

/// Complex power injected at every non-slack bus for a candidate voltage:
/// `diag(V)(Y*V* + Ȳ* V_s* − I_L*)`.
pub fn power_injection(
    p: &AdmittancePartition,
    voltage: &DVector<Complex64>,
    i_load: &DVector<Complex64>,
    v_slack: Complex64,
) -> DVector<Complex64> {
    let current = &p.y * voltage + &p.ybar * v_slack - i_load;
    voltage.component_mul(&conj_vec(&current))
}

/// Injection at `voltage` minus the scheduled `S` of the case. At PV buses only
/// the real part is a balance error.
pub fn nonlinear_mismatch(
    p: &AdmittancePartition,
    voltage: &DVector<Complex64>,
    case: &NetworkCase,
) -> DVector<Complex64> {
    power_injection(p, voltage, &case.load_currents(), case.slack_voltage()) - case.scheduled_power()
}
