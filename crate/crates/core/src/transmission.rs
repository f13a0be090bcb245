//! Lossless flat-voltage solution and classical DC power flow.
//!
//! With `G = 0`, `V = 1` and `V_s = 1∠0` the active-power rows of the
//! perturbation system read `Φ_re ΔV_re + Φ_im ΔV_im = P + I_L,re` with
//! `Φ_re = −diag(I_L,re)` and `Φ_im = −(B − diag(B_sh)) − diag(I_L,im)`.
//! Suppressing `ΔV_re` leaves a square system whose solution balances active
//! power exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{im_vec, re_vec, Lu};
use crate::linearize::{LinearSolution, NominalVoltage, SolutionMethod, SolveDiagnostics};
use crate::netmodel::{matrix_graph_connected, AdmittancePartition, BusId, NetworkCase, DOMINANCE_RTOL};
use crate::residuals::dagger_norm;

/// Largest conductance magnitude accepted as lossless.
pub const LOSSLESS_TOL: f64 = 1e-9;
/// Allowed distance of the slack voltage from `1∠0`.
pub const UNITY_SLACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LosslessSystem {
    pub b: DMatrix<f64>,
    pub bsh: DVector<f64>,
    /// Diagonal of `Φ_re = −diag(I_L,re)`.
    pub phi_re: DVector<f64>,
    pub phi_im: DMatrix<f64>,
    pub p: DVector<f64>,
    pub i_load: DVector<Complex64>,
}

impl LosslessSystem {
    /// Gates on `max |G| ≤ LOSSLESS_TOL` (including slack coupling and shunt
    /// conductances) and on a unity slack voltage.
    pub fn new(partition: &AdmittancePartition, case: &NetworkCase) -> Result<Self> {
        let max_conductance = partition.max_conductance();
        if max_conductance > LOSSLESS_TOL {
            return Err(Error::LossyNetwork { max_conductance });
        }
        if (case.slack_voltage() - Complex64::new(1.0, 0.0)).norm() > UNITY_SLACK_TOL {
            return Err(Error::SlackNotUnity);
        }
        Ok(Self::from_parts(partition, case.active_power(), case.load_currents()))
    }

    /// Builds the system without the gates; used by callers that have already
    /// checked the premise.
    pub fn from_parts(partition: &AdmittancePartition, p: DVector<f64>, i_load: DVector<Complex64>) -> Self {
        let b = partition.b();
        let bsh = partition.bsh();
        let il_re = re_vec(&i_load);
        let il_im = im_vec(&i_load);
        let phi_im = -(&b - DMatrix::from_diagonal(&bsh)) - DMatrix::from_diagonal(&il_im);
        LosslessSystem { b, bsh, phi_re: -il_re, phi_im, p, i_load }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// `P + I_L,re`.
    pub fn rhs(&self) -> DVector<f64> {
        &self.p + re_vec(&self.i_load)
    }
}

/// Per-bus dominance of the rows of `Φ_im`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Conditions {
    /// `|Φ_im,ℓℓ|`, i.e. `|Σ_{m≠ℓ} b_ℓm − I_L,im,ℓ|` with the sum over all
    /// neighbours including the slack bus.
    pub diagonal: Vec<f64>,
    /// `Σ_{m≠ℓ} |b_ℓm|` over non-slack neighbours.
    pub off_diagonal: Vec<f64>,
    pub weak: Vec<bool>,
    pub strict: Vec<bool>,
    pub strict_at_slack_adjacent: bool,
    pub irreducible: bool,
    pub overall: bool,
}

impl Theorem1Conditions {
    pub fn violated_buses(&self) -> Vec<BusId> {
        self.weak
            .iter()
            .enumerate()
            .filter(|(_, w)| !**w)
            .map(|(i, _)| BusId::from_index(i))
            .collect()
    }
}

pub fn check_theorem1_conditions(sys: &LosslessSystem, slack_adjacent: &[BusId]) -> Theorem1Conditions {
    let n = sys.n();
    let mut diagonal = Vec::with_capacity(n);
    let mut off_diagonal = Vec::with_capacity(n);
    let mut weak = Vec::with_capacity(n);
    let mut strict = Vec::with_capacity(n);
    for l in 0..n {
        let d = sys.phi_im[(l, l)].abs();
        let off: f64 = (0..n).filter(|&m| m != l).map(|m| sys.b[(l, m)].abs()).sum();
        let slack = DOMINANCE_RTOL * d.max(off);
        diagonal.push(d);
        off_diagonal.push(off);
        weak.push(d >= off - slack);
        strict.push(d > off + slack);
    }
    let strict_at_slack_adjacent = slack_adjacent.iter().any(|id| strict[id.index()]);
    let irreducible = matrix_graph_connected(n, |i, j| sys.b[(i, j)] != 0.0);
    let overall = weak.iter().all(|&w| w) && strict_at_slack_adjacent && irreducible;
    Theorem1Conditions { diagonal, off_diagonal, weak, strict, strict_at_slack_adjacent, irreducible, overall }
}

/// `ΔV = j Φ_im⁻¹ (P + I_L,re)` around the flat profile.
///
/// When the dominance conditions fail the solve is refused unless
/// `override_conditions` is set; the override is recorded in the diagnostics.
pub fn solve_lossless_flat(
    sys: &LosslessSystem,
    slack_adjacent: &[BusId],
    override_conditions: bool,
) -> Result<LinearSolution> {
    let conditions = check_theorem1_conditions(sys, slack_adjacent);
    let mut violated = conditions.violated_buses();
    if !conditions.overall && violated.is_empty() {
        // Weakly dominant everywhere but not strict anywhere near the slack.
        violated = slack_adjacent.to_vec();
    }
    if !conditions.overall && !override_conditions {
        return Err(Error::ConditionsViolated { buses: violated.iter().map(|b| b.0).collect() });
    }
    let lu = Lu::factor(&sys.phi_im);
    if lu.is_singular() {
        return Err(Error::SingularPhi { pivot_ratio: lu.pivot_ratio() });
    }
    let dv_im = lu.solve(&sys.rhs());
    let n = sys.n();
    Ok(LinearSolution {
        nominal: NominalVoltage::flat(n),
        dv: dv_im.map(|x| Complex64::new(0.0, x)),
        method: SolutionMethod::LosslessFlat,
        slack_voltage: Complex64::new(1.0, 0.0),
        diagnostics: SolveDiagnostics {
            condition_estimate: Some(lu.condition_estimate()),
            pivot_ratio: Some(lu.pivot_ratio()),
            theorem1: Some(conditions.overall),
            conditions_overridden: !conditions.overall,
            violated_buses: if conditions.overall { Vec::new() } else { violated },
            ..Default::default()
        },
    })
}

/// `‖B‖† ‖ΔV_im‖²`, the a-priori bound on `‖Q_h.o.t.‖` for the lossless solution.
pub fn qhot_bound(sys: &LosslessSystem, sol: &LinearSolution) -> f64 {
    debug_assert_eq!(sol.method, SolutionMethod::LosslessFlat);
    let x = sol.dv_im();
    dagger_norm(&sys.b) * x.norm_squared()
}

/// Classical DC power flow `−(B − diag(B_sh)) θ = P`. With `keep_gsh` the
/// right-hand side is `P − G_sh`, the form before shunt conductances are
/// dropped.
pub fn solve_classical_dc(p: &AdmittancePartition, active: &DVector<f64>, keep_gsh: bool) -> Result<DVector<f64>> {
    if active.len() != p.n() {
        return Err(Error::DimensionMismatch(format!("P has length {}, expected {}", active.len(), p.n())));
    }
    let a = -(p.b() - DMatrix::from_diagonal(&p.bsh()));
    let lu = Lu::factor(&a);
    if lu.is_singular() {
        return Err(Error::SingularB { pivot_ratio: lu.pivot_ratio() });
    }
    let rhs = if keep_gsh { active - p.gsh() } else { active.clone() };
    Ok(lu.solve(&rhs))
}

/// `‖(B − diag(B_sh))⁻¹ G_sh‖`, the angle error caused by dropping shunt
/// conductances.
pub fn dc_shunt_conductance_error(p: &AdmittancePartition) -> Result<f64> {
    let a = p.b() - DMatrix::from_diagonal(&p.bsh());
    let lu = Lu::factor(&a);
    if lu.is_singular() {
        return Err(Error::SingularB { pivot_ratio: lu.pivot_ratio() });
    }
    Ok(lu.solve(&p.gsh()).norm())
}

/// DC angles packaged as a flat-voltage solution `1 + jθ`.
pub fn classical_dc_solution(p: &AdmittancePartition, case: &NetworkCase, keep_gsh: bool) -> Result<LinearSolution> {
    let theta = solve_classical_dc(p, &case.active_power(), keep_gsh)?;
    Ok(LinearSolution {
        nominal: NominalVoltage::flat(p.n()),
        dv: theta.map(|t| Complex64::new(0.0, t)),
        method: SolutionMethod::ClassicalDc,
        slack_voltage: case.slack_voltage(),
        diagnostics: SolveDiagnostics::default(),
    })
}

/// Euclidean distance between two angle vectors.
pub fn angle_gap(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_admittance, ZipLoad};
    use crate::residuals::{compute_shot, nonlinear_mismatch};
    use crate::synth::{self, LosslessOptions};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ladder_system(p: f64) -> (NetworkCase, AdmittancePartition, LosslessSystem) {
        let case = synth::ladder(c(0.0, -10.0), ZipLoad::constant_power(c(p, 0.0)));
        let part = build_admittance(&case);
        let sys = LosslessSystem::new(&part, &case).unwrap();
        (case, part, sys)
    }

    fn adjacent(p: &AdmittancePartition) -> Vec<BusId> {
        p.slack_adjacent().into_iter().map(BusId::from_index).collect()
    }

    #[test]
    fn phi_definitions() {
        let case = synth::lossless_network(8, 12, &LosslessOptions::default());
        let part = build_admittance(&case);
        let sys = LosslessSystem::new(&part, &case).unwrap();
        let il = case.load_currents();
        for i in 0..8 {
            assert!((sys.phi_re[i] + il[i].re).abs() < 1e-12);
            for j in 0..8 {
                let expect = -part.y[(i, j)].im
                    + if i == j { part.ysh[i].im - il[i].im } else { 0.0 };
                assert!((sys.phi_im[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ladder_conditions_hold() {
        let (_, part, sys) = ladder_system(0.0);
        let cond = check_theorem1_conditions(&sys, &adjacent(&part));
        assert_eq!(cond.diagonal, vec![10.0]);
        assert_eq!(cond.off_diagonal, vec![0.0]);
        assert!(cond.overall);
    }

    #[test]
    fn zero_current_reduces_to_dominance_of_b() {
        let opts = LosslessOptions { current_loads: false, line_shunts: false, zip_shunts: false, pv_fraction: 0.5 };
        for seed in 0..10 {
            let case = synth::lossless_network(9, seed, &opts);
            let part = build_admittance(&case);
            let sys = LosslessSystem::new(&part, &case).unwrap();
            assert!(check_theorem1_conditions(&sys, &adjacent(&part)).overall);
        }
    }

    #[test]
    fn cancelling_current_breaks_conditions() {
        // Bus 1 connects only to the slack: Φ_im,11 = 10 − I_L,im.
        let case = synth::ladder(c(0.0, -10.0), ZipLoad::default().with_current(c(0.0, 10.0)));
        let part = build_admittance(&case);
        let sys = LosslessSystem::new(&part, &case).unwrap();
        let cond = check_theorem1_conditions(&sys, &adjacent(&part));
        assert_eq!(cond.diagonal, vec![0.0]);
        assert!(cond.weak[0] && !cond.strict[0]);
        assert!(!cond.overall);
        let err = solve_lossless_flat(&sys, &adjacent(&part), false).unwrap_err();
        assert_eq!(err.code(), "THEOREM1_CONDITIONS_VIOLATED");
        // Overriding still fails because Φ_im = [0].
        assert_eq!(solve_lossless_flat(&sys, &adjacent(&part), true).unwrap_err().code(), "SINGULAR_PHI");
    }

    #[test]
    fn override_is_recorded() {
        // Three buses in a line off the slack; bus 2 has its dominance broken
        // but Φ_im stays invertible.
        let case = crate::netmodel::NetworkCase::new(
            vec![
                crate::netmodel::Bus::zip(BusId(1), ZipLoad::constant_power(c(0.1, 0.0))),
                crate::netmodel::Bus::zip(BusId(2), ZipLoad::default().with_current(c(0.0, 15.0))),
                crate::netmodel::Bus::slack(BusId(3), 1.0, 0.0),
            ],
            vec![
                crate::netmodel::Branch::new(BusId(1), BusId(3), c(0.0, -10.0)),
                crate::netmodel::Branch::new(BusId(1), BusId(2), c(0.0, -10.0)),
            ],
            100.0,
        )
        .unwrap();
        let part = build_admittance(&case);
        let sys = LosslessSystem::new(&part, &case).unwrap();
        let sol = solve_lossless_flat(&sys, &adjacent(&part), true).unwrap();
        assert!(sol.diagnostics.conditions_overridden);
        assert_eq!(sol.diagnostics.violated_buses, vec![BusId(2)]);
        assert_eq!(sol.diagnostics.theorem1, Some(false));
    }

    #[test]
    fn gates() {
        let lossy = synth::ladder(c(1.0, -10.0), ZipLoad::default());
        let part = build_admittance(&lossy);
        assert_eq!(LosslessSystem::new(&part, &lossy).unwrap_err().code(), "LOSSY_NETWORK");
        let raised = crate::netmodel::NetworkCase::new(
            vec![
                crate::netmodel::Bus::zip(BusId(1), ZipLoad::default()),
                crate::netmodel::Bus::slack(BusId(2), 1.05, 0.0),
            ],
            vec![crate::netmodel::Branch::new(BusId(1), BusId(2), c(0.0, -10.0))],
            100.0,
        )
        .unwrap();
        let part = build_admittance(&raised);
        assert_eq!(LosslessSystem::new(&part, &raised).unwrap_err(), Error::SlackNotUnity);
    }

    #[test]
    fn no_injection_gives_flat_profile() {
        let (case, part, sys) = ladder_system(0.0);
        let sol = solve_lossless_flat(&sys, &adjacent(&part), false).unwrap();
        assert_eq!(sol.dv[0], c(0.0, 0.0));
        assert!(nonlinear_mismatch(&part, &sol.approx_voltage(), &case)[0].norm() < 1e-15);
        assert_eq!(qhot_bound(&sys, &sol), 0.0);
    }

    #[test]
    fn ladder_exact_active_balance_and_tight_q_bound() {
        let (case, part, sys) = ladder_system(0.5);
        let sol = solve_lossless_flat(&sys, &adjacent(&part), false).unwrap();
        assert!((sol.dv[0] - c(0.0, 0.05)).norm() < 1e-15);
        // Re{(1 + j0.05) conj(-j10 (1 + j0.05) + j10)} = Re{(1 + j0.05) 0.5} = 0.5.
        let m = nonlinear_mismatch(&part, &sol.approx_voltage(), &case);
        assert!(m[0].re.abs() < 1e-15);
        let bound = qhot_bound(&sys, &sol);
        let q = compute_shot(&part, &sol.dv).unwrap().q_norm;
        assert!((bound - 0.025).abs() < 1e-12);
        assert!((q - 0.025).abs() < 1e-12);
    }

    #[test]
    fn random_lossless_cases_balance_active_power() {
        for seed in 0..30 {
            let case = synth::lossless_network(10, seed, &LosslessOptions::default());
            let part = build_admittance(&case);
            let sys = LosslessSystem::new(&part, &case).unwrap();
            let sol = solve_lossless_flat(&sys, &adjacent(&part), false).unwrap();
            let r = compute_shot(&part, &sol.dv).unwrap();
            assert!(r.p_norm <= 1e-10 * (1.0 + sys.p.norm()));
            assert!(r.q_norm <= qhot_bound(&sys, &sol) + 1e-12);
            let m = nonlinear_mismatch(&part, &sol.approx_voltage(), &case);
            assert!(m.iter().all(|z| z.re.abs() <= 1e-10));
        }
    }

    #[test]
    fn dc_examples() {
        let (case, part, sys) = ladder_system(0.5);
        assert_eq!(solve_classical_dc(&part, &DVector::zeros(1), false).unwrap()[0], 0.0);
        let theta = solve_classical_dc(&part, &case.active_power(), false).unwrap();
        assert!((theta[0] - 0.05).abs() < 1e-15);
        let flat = solve_lossless_flat(&sys, &adjacent(&part), false).unwrap();
        assert!((flat.dv_im()[0] - theta[0]).abs() < 1e-15);
    }

    #[test]
    fn dropping_shunt_conductance_shifts_angles_by_the_stated_error() {
        for seed in 0..10 {
            let case = synth::meshed_network(8, seed);
            let part = build_admittance(&case);
            let keep = solve_classical_dc(&part, &case.active_power(), true).unwrap();
            let drop = solve_classical_dc(&part, &case.active_power(), false).unwrap();
            let err = dc_shunt_conductance_error(&part).unwrap();
            assert!(err > 0.0);
            assert!((angle_gap(&keep, &drop) - err).abs() < 1e-12);
        }
    }
}
