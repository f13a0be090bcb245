//! First-order perturbation of the complex power balance.
//!
//! Around a nominal profile `V`, the exact balance
//! `S = diag(V+ΔV)(Y*(V+ΔV)* + Ȳ*V_s* − I_L*)` becomes
//! `Γ ΔV + Ξ ΔV* = S + Π` once the term `diag(ΔV) Y* ΔV*` is dropped.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{complex_vec, conj_mat, conj_vec, im_vec, re_vec, Lu};
use crate::netmodel::{AdmittancePartition, BusId, NetworkCase};

/// Entries with magnitude below this are treated as zero voltages.
pub const VOLTAGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NominalOrigin {
    Flat,
    NoLoad,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalVoltage {
    pub values: DVector<Complex64>,
    pub origin: NominalOrigin,
}

impl NominalVoltage {
    pub fn flat(n: usize) -> Self {
        NominalVoltage { values: DVector::from_element(n, Complex64::new(1.0, 0.0)), origin: NominalOrigin::Flat }
    }

    pub fn user(values: DVector<Complex64>) -> Self {
        NominalVoltage { values, origin: NominalOrigin::UserSupplied }
    }
}

/// `Γ` (stored as its diagonal), `Ξ` and `Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCoefficients {
    pub gamma: DVector<Complex64>,
    pub xi: DMatrix<Complex64>,
    pub pi: DVector<Complex64>,
}

impl PerturbationCoefficients {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.gamma)
    }

    /// `Γ ΔV + Ξ ΔV* − (S + Π)`.
    pub fn linear_residual(&self, dv: &DVector<Complex64>, s: &DVector<Complex64>) -> DVector<Complex64> {
        self.gamma.component_mul(dv) + &self.xi * conj_vec(dv) - s - &self.pi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionMethod {
    General2N,
    NoLoadClosedForm,
    LosslessFlat,
    ClassicalDc,
    /// No-load closed form written through `w = −Y⁻¹Ȳ` (requires `I_L = 0`).
    BolognaniSpecial,
}

impl SolutionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolutionMethod::General2N => "general_2n",
            SolutionMethod::NoLoadClosedForm => "noload_closed_form",
            SolutionMethod::LosslessFlat => "lossless_flat",
            SolutionMethod::ClassicalDc => "classical_dc",
            SolutionMethod::BolognaniSpecial => "bolognani_special",
        }
    }

    /// Methods that only enforce the active-power rows of the linear system.
    pub fn active_rows_only(self) -> bool {
        matches!(self, SolutionMethod::LosslessFlat | SolutionMethod::ClassicalDc)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub condition_estimate: Option<f64>,
    pub pivot_ratio: Option<f64>,
    pub singular: bool,
    pub lemma1: Option<bool>,
    pub theorem1: Option<bool>,
    pub conditions_overridden: bool,
    pub violated_buses: Vec<BusId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub nominal: NominalVoltage,
    pub dv: DVector<Complex64>,
    pub method: SolutionMethod,
    pub slack_voltage: Complex64,
    pub diagnostics: SolveDiagnostics,
}

impl LinearSolution {
    /// `V + ΔV`, the approximation to the exact solution.
    pub fn approx_voltage(&self) -> DVector<Complex64> {
        &self.nominal.values + &self.dv
    }

    pub fn dv_re(&self) -> DVector<f64> {
        re_vec(&self.dv)
    }

    pub fn dv_im(&self) -> DVector<f64> {
        im_vec(&self.dv)
    }
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::DimensionMismatch(format!("{what} has length {len}, expected {n}")));
    }
    Ok(())
}

/// `Y*V* + Ȳ* V_s* − I_L*`, the conjugated net current at each bus.
fn conj_net_current(
    p: &AdmittancePartition,
    v: &DVector<Complex64>,
    i_load: &DVector<Complex64>,
    v_slack: Complex64,
) -> DVector<Complex64> {
    let current = &p.y * v + &p.ybar * v_slack - i_load;
    conj_vec(&current)
}

pub fn assemble_coefficients(
    p: &AdmittancePartition,
    nominal: &NominalVoltage,
    i_load: &DVector<Complex64>,
    v_slack: Complex64,
) -> Result<PerturbationCoefficients> {
    let n = p.n();
    check_len("nominal voltage", nominal.values.len(), n)?;
    check_len("I_L", i_load.len(), n)?;
    let v = &nominal.values;
    let gamma = conj_net_current(p, v, i_load, v_slack);
    let xi = DMatrix::from_diagonal(v) * conj_mat(&p.y);
    let pi = -v.component_mul(&gamma);
    Ok(PerturbationCoefficients { gamma, xi, pi })
}

/// Real `2N×2N` block matrix acting on `[ΔV_re; ΔV_im]`.
pub fn block_matrix(coeffs: &PerturbationCoefficients) -> DMatrix<f64> {
    let n = coeffs.n();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let x = coeffs.xi[(i, j)];
            let (gr, gi) = if i == j { (coeffs.gamma[i].re, coeffs.gamma[i].im) } else { (0.0, 0.0) };
            m[(i, j)] = gr + x.re;
            m[(i, n + j)] = -gi + x.im;
            m[(n + i, j)] = gi + x.im;
            m[(n + i, n + j)] = gr - x.re;
        }
    }
    m
}

/// Solves `Γ ΔV + Ξ ΔV* = S + Π` as a real `2N` system.
pub fn solve_general_2n(
    coeffs: &PerturbationCoefficients,
    s: &DVector<Complex64>,
    nominal: &NominalVoltage,
    v_slack: Complex64,
) -> Result<LinearSolution> {
    let n = coeffs.n();
    check_len("S", s.len(), n)?;
    check_len("nominal voltage", nominal.values.len(), n)?;
    let m = block_matrix(coeffs);
    let rhs_c = s + &coeffs.pi;
    let mut rhs = DVector::zeros(2 * n);
    for i in 0..n {
        rhs[i] = rhs_c[i].re;
        rhs[n + i] = rhs_c[i].im;
    }
    let lu = Lu::factor(&m);
    if lu.is_singular() {
        return Err(Error::SingularSystem { pivot_ratio: lu.pivot_ratio() });
    }
    let x = lu.solve(&rhs);
    let dv = complex_vec(&x.rows(0, n).into_owned(), &x.rows(n, n).into_owned());
    Ok(LinearSolution {
        nominal: nominal.clone(),
        dv,
        method: SolutionMethod::General2N,
        slack_voltage: v_slack,
        diagnostics: SolveDiagnostics {
            condition_estimate: Some(lu.condition_estimate()),
            pivot_ratio: Some(lu.pivot_ratio()),
            ..Default::default()
        },
    })
}

/// General solve for a whole case. PV buses are rejected because their
/// reactive injection is unknown.
pub fn solve_general(
    case: &NetworkCase,
    p: &AdmittancePartition,
    nominal: &NominalVoltage,
) -> Result<LinearSolution> {
    if case.has_pv() {
        return Err(Error::PvUnsupportedInGeneral);
    }
    let coeffs = assemble_coefficients(p, nominal, &case.load_currents(), case.slack_voltage())?;
    solve_general_2n(&coeffs, &case.scheduled_power(), nominal, case.slack_voltage())
}

fn factor_y(p: &AdmittancePartition) -> Result<Lu<Complex64>> {
    let lu = Lu::factor(&p.y);
    if lu.is_singular() {
        return Err(Error::SingularY { pivot_ratio: lu.pivot_ratio() });
    }
    Ok(lu)
}

fn check_nonzero(v: &DVector<Complex64>) -> Result<()> {
    match v.iter().position(|x| x.norm() < VOLTAGE_FLOOR) {
        Some(i) => Err(Error::ZeroNoLoadVoltage { bus: i + 1 }),
        None => Ok(()),
    }
}

/// `V = Y⁻¹(I_L − Ȳ V_s)`, the solution of the balance with `S = 0`.
pub fn compute_noload_voltage(
    p: &AdmittancePartition,
    i_load: &DVector<Complex64>,
    v_slack: Complex64,
) -> Result<NominalVoltage> {
    check_len("I_L", i_load.len(), p.n())?;
    let lu = factor_y(p)?;
    let values = lu.solve(&(i_load - &p.ybar * v_slack));
    check_nonzero(&values)?;
    Ok(NominalVoltage { values, origin: NominalOrigin::NoLoad })
}

/// `ΔV = Y⁻¹ diag(1/V*) S*` around the no-load voltage.
pub fn solve_noload_closed_form(
    p: &AdmittancePartition,
    nominal: &NominalVoltage,
    s: &DVector<Complex64>,
    v_slack: Complex64,
) -> Result<LinearSolution> {
    if nominal.origin != NominalOrigin::NoLoad {
        return Err(Error::NominalNotNoLoad);
    }
    check_len("S", s.len(), p.n())?;
    check_len("nominal voltage", nominal.values.len(), p.n())?;
    check_nonzero(&nominal.values)?;
    let lu = factor_y(p)?;
    let rhs = DVector::from_fn(p.n(), |i, _| s[i].conj() / nominal.values[i].conj());
    let dv = lu.solve(&rhs);
    Ok(LinearSolution {
        nominal: nominal.clone(),
        dv,
        method: SolutionMethod::NoLoadClosedForm,
        slack_voltage: v_slack,
        diagnostics: SolveDiagnostics {
            condition_estimate: Some(lu.condition_estimate()),
            pivot_ratio: Some(lu.pivot_ratio()),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::netmodel::{build_admittance, ZipLoad};
    use crate::synth;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> Complex64 {
        c(1.0, 0.0)
    }

    #[test]
    fn noload_nominal_zeroes_gamma_and_pi() {
        for seed in 0..10 {
            let case = synth::meshed_network(7, seed);
            let p = build_admittance(&case);
            let il = case.load_currents();
            let nominal = compute_noload_voltage(&p, &il, case.slack_voltage()).unwrap();
            let k = assemble_coefficients(&p, &nominal, &il, case.slack_voltage()).unwrap();
            assert!(k.gamma.iter().all(|g| g.norm() < 1e-12), "{:?}", k.gamma);
            assert!(k.pi.iter().all(|g| g.norm() < 1e-12));
        }
    }

    #[test]
    fn flat_lossless_ladder_coefficients() {
        // Hand substitution: Y = -j10, Ȳ = j10, V = 1, V_s = 1, I_L = 0 gives
        // Γ = conj(-j10 + j10) = 0, Ξ = conj(-j10) = j10, Π = 0.
        let case = synth::ladder(c(0.0, -10.0), ZipLoad::default());
        let p = build_admittance(&case);
        let k = assemble_coefficients(&p, &NominalVoltage::flat(1), &DVector::zeros(1), one()).unwrap();
        assert!(k.gamma[0].norm() < 1e-15);
        assert!((k.xi[(0, 0)] - c(0.0, 10.0)).norm() < 1e-15);
        assert!(k.pi[0].norm() < 1e-15);
    }

    #[test]
    fn pi_is_minus_v_times_gamma() {
        let case = synth::meshed_network(9, 4);
        let p = build_admittance(&case);
        let v = NominalVoltage::user(DVector::from_fn(9, |i, _| c(1.0 - 0.01 * i as f64, 0.02 * i as f64)));
        let k = assemble_coefficients(&p, &v, &case.load_currents(), case.slack_voltage()).unwrap();
        let expect = -v.values.component_mul(&k.gamma);
        assert!((k.pi - expect).norm() < 1e-12);
    }

    #[test]
    fn homogeneous_rhs_gives_zero_perturbation() {
        let case = synth::meshed_network(6, 2);
        let p = build_admittance(&case);
        let nominal = NominalVoltage::flat(6);
        let k = assemble_coefficients(&p, &nominal, &case.load_currents(), case.slack_voltage()).unwrap();
        let s = -&k.pi;
        let sol = solve_general_2n(&k, &s, &nominal, case.slack_voltage()).unwrap();
        assert!(norm2(&sol.dv) < 1e-14);
    }

    #[test]
    fn ladder_general_solve_hand_value() {
        // Block system [[0, 10], [10, 0]] [x; y] = [0.5; 0] gives ΔV = j0.05.
        let case = synth::ladder(c(0.0, -10.0), ZipLoad::constant_power(c(0.5, 0.0)));
        let p = build_admittance(&case);
        let sol = solve_general(&case, &p, &NominalVoltage::flat(1)).unwrap();
        assert!((sol.dv[0] - c(0.0, 0.05)).norm() < 1e-15);
    }

    #[test]
    fn general_matches_closed_form_at_noload() {
        for seed in 0..8 {
            let case = synth::meshed_network(8, 100 + seed);
            let p = build_admittance(&case);
            let il = case.load_currents();
            let nominal = compute_noload_voltage(&p, &il, case.slack_voltage()).unwrap();
            let general = solve_general(&case, &p, &nominal).unwrap();
            let closed =
                solve_noload_closed_form(&p, &nominal, &case.scheduled_power(), case.slack_voltage()).unwrap();
            assert!(norm2(&(general.dv - closed.dv)) < 1e-10);
        }
    }

    #[test]
    fn general_rejects_pv() {
        let case = synth::lossless_network(5, 1, &synth::LosslessOptions { pv_fraction: 1.0, ..Default::default() });
        let p = build_admittance(&case);
        assert_eq!(solve_general(&case, &p, &NominalVoltage::flat(5)), Err(Error::PvUnsupportedInGeneral));
    }

    #[test]
    fn singular_system_is_reported() {
        let k = PerturbationCoefficients {
            gamma: DVector::zeros(2),
            xi: DMatrix::zeros(2, 2),
            pi: DVector::zeros(2),
        };
        let err = solve_general_2n(&k, &DVector::zeros(2), &NominalVoltage::flat(2), one()).unwrap_err();
        assert_eq!(err.code(), "SINGULAR_SYSTEM");
    }

    #[test]
    fn ladder_noload_voltage_is_one() {
        let p = build_admittance(&synth::ladder(c(1.0, -5.0), ZipLoad::default()));
        let v = compute_noload_voltage(&p, &DVector::zeros(1), one()).unwrap();
        assert!((v.values[0] - one()).norm() < 1e-15);
    }

    #[test]
    fn zero_noload_voltage_is_an_error() {
        let p = build_admittance(&synth::ladder(c(1.0, -5.0), ZipLoad::default()));
        let il = p.ybar.clone();
        assert_eq!(compute_noload_voltage(&p, &il, one()), Err(Error::ZeroNoLoadVoltage { bus: 1 }));
    }

    #[test]
    fn ladder_closed_form_value() {
        // (−0.1 + j0.05) / (1 − j5) = (−0.35 − j0.45) / 26.
        let p = build_admittance(&synth::ladder(c(1.0, -5.0), ZipLoad::default()));
        let nominal = compute_noload_voltage(&p, &DVector::zeros(1), one()).unwrap();
        let s = DVector::from_element(1, c(-0.1, -0.05));
        let sol = solve_noload_closed_form(&p, &nominal, &s, one()).unwrap();
        assert!((sol.dv[0] - c(-0.35 / 26.0, -0.45 / 26.0)).norm() < 1e-15);
        assert!((sol.dv[0] - c(-0.013462, -0.017308)).norm() < 1e-6);
    }

    #[test]
    fn closed_form_requires_noload_origin() {
        let p = build_admittance(&synth::ladder(c(1.0, -5.0), ZipLoad::default()));
        let err = solve_noload_closed_form(&p, &NominalVoltage::flat(1), &DVector::zeros(1), one());
        assert_eq!(err, Err(Error::NominalNotNoLoad));
    }

    #[test]
    fn zero_injection_keeps_noload_voltage() {
        let case = synth::radial_feeder(6, 9, &Default::default());
        let p = build_admittance(&case);
        let nominal = compute_noload_voltage(&p, &case.load_currents(), case.slack_voltage()).unwrap();
        let sol = solve_noload_closed_form(&p, &nominal, &DVector::zeros(6), case.slack_voltage()).unwrap();
        assert!(sol.dv.iter().all(|d| *d == c(0.0, 0.0)));
        assert_eq!(sol.approx_voltage(), nominal.values);
    }

    #[test]
    fn closed_form_defining_equation() {
        for seed in 0..5 {
            let case = synth::radial_feeder(9, seed, &Default::default());
            let p = build_admittance(&case);
            let nominal = compute_noload_voltage(&p, &case.load_currents(), case.slack_voltage()).unwrap();
            let s = case.scheduled_power();
            let sol = solve_noload_closed_form(&p, &nominal, &s, case.slack_voltage()).unwrap();
            let lhs = DMatrix::from_diagonal(&conj_vec(&nominal.values)) * &p.y * &sol.dv;
            assert!(norm2(&(lhs - conj_vec(&s))) < 1e-10);
        }
    }

    #[test]
    fn linear_residual_vanishes_for_both_solvers() {
        for seed in 0..6 {
            let case = synth::meshed_network(10, 40 + seed);
            let p = build_admittance(&case);
            let il = case.load_currents();
            let s = case.scheduled_power();
            let tol = 1e-9 * (1.0 + norm2(&s));
            let flat = NominalVoltage::flat(10);
            let k = assemble_coefficients(&p, &flat, &il, case.slack_voltage()).unwrap();
            let sol = solve_general_2n(&k, &s, &flat, case.slack_voltage()).unwrap();
            assert!(norm2(&k.linear_residual(&sol.dv, &s)) <= tol);
            assert!(sol.diagnostics.condition_estimate.unwrap() >= 1.0);

            let nl = compute_noload_voltage(&p, &il, case.slack_voltage()).unwrap();
            let k = assemble_coefficients(&p, &nl, &il, case.slack_voltage()).unwrap();
            let sol = solve_noload_closed_form(&p, &nl, &s, case.slack_voltage()).unwrap();
            assert!(norm2(&k.linear_residual(&sol.dv, &s)) <= tol);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = build_admittance(&synth::ladder(c(1.0, -5.0), ZipLoad::default()));
        let err = assemble_coefficients(&p, &NominalVoltage::flat(2), &DVector::zeros(1), one()).unwrap_err();
        assert_eq!(err.code(), "DIMENSION_MISMATCH");
    }
}
