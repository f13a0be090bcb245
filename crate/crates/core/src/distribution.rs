//! Closed-form solutions for ZIP-only feeders around the no-load voltage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{conj_mat, norm2, re_mat, im_mat, Lu};
use crate::linearize::{
    compute_noload_voltage, solve_noload_closed_form, LinearSolution, NominalOrigin, NominalVoltage,
    SolutionMethod, SolveDiagnostics, VOLTAGE_FLOOR,
};
use crate::netmodel::{check_lemma1_structure, AdmittancePartition, BusKind, NetworkCase};
use crate::residuals::dagger_norm;

fn require_all_zip(case: &NetworkCase) -> Result<()> {
    match case.non_slack().iter().find(|b| !matches!(b.kind, BusKind::Zip)) {
        Some(bus) => Err(Error::NonZipBusPresent { bus: bus.id.0 }),
        None => Ok(()),
    }
}

/// No-load nominal voltage followed by `ΔV = Y⁻¹ diag(1/V*) S*`.
pub fn solve_distribution(p: &AdmittancePartition, case: &NetworkCase) -> Result<LinearSolution> {
    require_all_zip(case)?;
    let il = case.load_currents();
    let vs = case.slack_voltage();
    let lemma1 = check_lemma1_structure(p, &il, vs);
    let nominal = compute_noload_voltage(p, &il, vs)?;
    let mut sol = solve_noload_closed_form(p, &nominal, &case.scheduled_power(), vs)?;
    sol.diagnostics.lemma1 = Some(lemma1.verdict);
    Ok(sol)
}

/// `R + jX = (G + jB)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceDecomposition {
    pub r: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl ImpedanceDecomposition {
    pub fn new(p: &AdmittancePartition) -> Result<Self> {
        let lu = Lu::factor(&p.y);
        if lu.is_singular() {
            return Err(Error::SingularY { pivot_ratio: lu.pivot_ratio() });
        }
        let z = lu.inverse();
        Ok(ImpedanceDecomposition { r: re_mat(&z), x: im_mat(&z) })
    }
}

/// The four additive pieces of `ΔV_re` and `ΔV_im`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTerms {
    pub dvre_from_p: DVector<f64>,
    pub dvre_from_q: DVector<f64>,
    pub dvim_from_p: DVector<f64>,
    pub dvim_from_q: DVector<f64>,
}

impl CouplingTerms {
    pub fn dv_re(&self) -> DVector<f64> {
        &self.dvre_from_p + &self.dvre_from_q
    }

    pub fn dv_im(&self) -> DVector<f64> {
        &self.dvim_from_p + &self.dvim_from_q
    }
}

/// `|V|` and `θ` of a rectangular profile.
pub fn polar_parts(v: &DVector<Complex64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if let Some(i) = v.iter().position(|z| z.norm() < VOLTAGE_FLOOR) {
        return Err(Error::VanishingMagnitude { bus: i + 1 });
    }
    Ok((v.map(|z| z.norm()), v.map(|z| z.im.atan2(z.re))))
}

/// Splits `ΔV = (R + jX) diag(1/V*) S*` into its `P` and `Q` driven parts:
///
/// ```text
/// ΔV_re = (R C − X S_n) P + (X C + R S_n) Q
/// ΔV_im = (X C + R S_n) P − (R C − X S_n) Q
/// ```
///
/// with `C = diag(cos θ / |V|)` and `S_n = diag(sin θ / |V|)`.
pub fn coupling_decomposition(
    p: &AdmittancePartition,
    nominal: &NominalVoltage,
    s: &DVector<Complex64>,
) -> Result<CouplingTerms> {
    let (mag, theta) = polar_parts(&nominal.values)?;
    let z = ImpedanceDecomposition::new(p)?;
    let cw = DMatrix::from_diagonal(&DVector::from_fn(mag.len(), |i, _| theta[i].cos() / mag[i]));
    let sw = DMatrix::from_diagonal(&DVector::from_fn(mag.len(), |i, _| theta[i].sin() / mag[i]));
    let direct = &z.r * &cw - &z.x * &sw;
    let cross = &z.x * &cw + &z.r * &sw;
    let pv = s.map(|v| v.re);
    let qv = s.map(|v| v.im);
    Ok(CouplingTerms {
        dvre_from_p: &direct * &pv,
        dvre_from_q: &cross * &qv,
        dvim_from_p: &cross * &pv,
        dvim_from_q: -(&direct * &qv),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledEstimate {
    pub magnitude: DVector<f64>,
    pub angle: DVector<f64>,
    /// `‖B‖†`; the estimate assumes it is zero.
    pub susceptance_norm: f64,
    /// `max |θ|` of the nominal profile; the estimate assumes it is zero.
    pub max_abs_angle: f64,
}

/// `|V| + G⁻¹ diag(1/|V|) P` and `θ − G⁻¹ diag(1/|V|) Q`, valid only when
/// `B = 0` and `θ = 0`. The violation of both assumptions is returned with
/// the estimate.
pub fn decoupled_estimate(
    p: &AdmittancePartition,
    nominal: &NominalVoltage,
    s: &DVector<Complex64>,
) -> Result<DecoupledEstimate> {
    let (mag, theta) = polar_parts(&nominal.values)?;
    let lu = Lu::factor(&p.g());
    if lu.is_singular() {
        return Err(Error::SingularG { pivot_ratio: lu.pivot_ratio() });
    }
    let scaled_p = DVector::from_fn(mag.len(), |i, _| s[i].re / mag[i]);
    let scaled_q = DVector::from_fn(mag.len(), |i, _| s[i].im / mag[i]);
    Ok(DecoupledEstimate {
        magnitude: &mag + lu.solve(&scaled_p),
        angle: &theta - lu.solve(&scaled_q),
        susceptance_norm: dagger_norm(&p.b()),
        max_abs_angle: theta.iter().map(|t| t.abs()).fold(0.0, f64::max),
    })
}

/// No-load closed form for `I_L = 0`, written through `w = −Y⁻¹Ȳ`:
/// `V_s (w + Y⁻¹ diag(1/w*) S* / V_o²)`.
pub fn solve_bolognani_special(p: &AdmittancePartition, case: &NetworkCase) -> Result<LinearSolution> {
    require_all_zip(case)?;
    if let Some(bus) = case.non_slack().iter().find(|b| b.zip.current.norm() != 0.0) {
        return Err(Error::NonzeroCurrentLoad { bus: bus.id.0 });
    }
    let vs = case.slack_voltage();
    let vo = vs.norm();
    let lu = Lu::factor(&p.y);
    if lu.is_singular() {
        return Err(Error::SingularY { pivot_ratio: lu.pivot_ratio() });
    }
    let w = -lu.solve(&p.ybar);
    if let Some(i) = w.iter().position(|z| z.norm() < VOLTAGE_FLOOR) {
        return Err(Error::ZeroNoLoadVoltage { bus: i + 1 });
    }
    let s = case.scheduled_power();
    let rhs = DVector::from_fn(w.len(), |i, _| s[i].conj() / w[i].conj());
    let u = lu.solve(&rhs);
    let nominal = NominalVoltage { values: w.map(|z| z * vs), origin: NominalOrigin::NoLoad };
    let dv = u.map(|z| z * vs / (vo * vo));
    Ok(LinearSolution {
        nominal,
        dv,
        method: SolutionMethod::BolognaniSpecial,
        slack_voltage: vs,
        diagnostics: SolveDiagnostics {
            condition_estimate: Some(lu.condition_estimate()),
            pivot_ratio: Some(lu.pivot_ratio()),
            ..Default::default()
        },
    })
}

/// A-priori bound on `‖S_h.o.t.‖` for the distribution solutions:
/// `‖Y*‖† ‖ΔV‖²`, or `‖Y*‖† ‖Y⁻¹ diag(1/w*) S*‖² / V_o²` on the `w` path.
pub fn shot_bound_distribution(p: &AdmittancePartition, sol: &LinearSolution) -> f64 {
    let y_dagger = dagger_norm(&conj_mat(&p.y));
    match sol.method {
        SolutionMethod::BolognaniSpecial => {
            let vs = sol.slack_voltage;
            let vo = vs.norm();
            // ΔV = (V_s / V_o²) u, so u = ΔV V_o² / V_s.
            let u = sol.dv.map(|z| z * (vo * vo) / vs);
            y_dagger * norm2(&u).powi(2) / (vo * vo)
        }
        _ => y_dagger * norm2(&sol.dv).powi(2),
    }
}
