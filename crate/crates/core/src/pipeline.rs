//! Method dispatch, certification and oracle comparison for one case.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::distribution::{
    decoupled_estimate, shot_bound_distribution, solve_bolognani_special, solve_distribution, DecoupledEstimate,
};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::linearize::{assemble_coefficients, solve_general, NominalVoltage, SolutionMethod};
use crate::netmodel::{build_admittance, check_lemma1_structure, AdmittancePartition, BusId, BusKind, Lemma1Diagnosis, NetworkCase};
use crate::oracle::{solve_newton, NewtonResult, NewtonSettings};
use crate::par;
use crate::residuals::{compute_shot, nonlinear_mismatch, BoundCheck, ResidualReport};
use crate::transmission::{
    check_theorem1_conditions, classical_dc_solution, dc_shunt_conductance_error, qhot_bound, solve_lossless_flat,
    LosslessSystem, Theorem1Conditions, LOSSLESS_TOL, UNITY_SLACK_TOL,
};

/// Relative tolerance of the identity checks, scaled by `1 + ‖S‖`.
pub const IDENTITY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    General,
    NoLoad,
    Lossless,
    Dc,
    Bolognani,
    Decoupled,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Auto,
        Method::General,
        Method::NoLoad,
        Method::Lossless,
        Method::Dc,
        Method::Bolognani,
        Method::Decoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::General => "general",
            Method::NoLoad => "noload",
            Method::Lossless => "lossless",
            Method::Dc => "dc",
            Method::Bolognani => "bolognani",
            Method::Decoupled => "decoupled",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub method: Method,
    pub with_oracle: bool,
    pub override_conditions: bool,
    /// Keep `G_sh` on the right-hand side of the DC solve.
    pub dc_keep_gsh: bool,
    pub timings: bool,
    pub newton: NewtonSettings,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            method: Method::Auto,
            with_oracle: false,
            override_conditions: false,
            dc_keep_gsh: false,
            timings: false,
            newton: NewtonSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl CheckStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl NamedCheck {
    fn new(name: &str, status: CheckStatus, detail: impl Into<String>) -> Self {
        NamedCheck { name: name.to_string(), status, detail: detail.into() }
    }
}

fn bus_list(ids: &[BusId]) -> String {
    let v: Vec<String> = ids.iter().map(|b| b.0.to_string()).collect();
    format!("[{}]", v.join(","))
}

/// Structural diagnostics of a case, independent of the chosen method.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDiagnosis {
    pub lossless: bool,
    pub max_conductance: f64,
    pub slack_unity: bool,
    pub all_zip: bool,
    pub lemma1: Lemma1Diagnosis,
    /// Present when the network is lossless.
    pub theorem1: Option<Theorem1Conditions>,
    pub checks: Vec<NamedCheck>,
}

pub fn diagnose(case: &NetworkCase, p: &AdmittancePartition) -> CaseDiagnosis {
    let max_conductance = p.max_conductance();
    let lossless = max_conductance <= LOSSLESS_TOL;
    let slack_unity = (case.slack_voltage() - Complex64::new(1.0, 0.0)).norm() <= UNITY_SLACK_TOL;
    let all_zip = case.is_all_zip();
    let lemma1 = check_lemma1_structure(p, &case.load_currents(), case.slack_voltage());
    let adjacent: Vec<BusId> = p.slack_adjacent().into_iter().map(BusId::from_index).collect();
    let theorem1 = lossless.then(|| {
        let sys = LosslessSystem::from_parts(p, case.active_power(), case.load_currents());
        check_theorem1_conditions(&sys, &adjacent)
    });

    let mut checks = vec![
        NamedCheck::new(
            "losslessness",
            CheckStatus::from_bool(lossless),
            format!("max |G| = {max_conductance:.3e} (limit {LOSSLESS_TOL:.0e})"),
        ),
        NamedCheck::new(
            "slack_unity",
            CheckStatus::from_bool(slack_unity),
            format!("V_slack = {:.6}{:+.6}j", case.slack_voltage().re, case.slack_voltage().im),
        ),
    ];
    let pv: Vec<BusId> = case.non_slack().iter().filter(|b| b.is_pv()).map(|b| b.id).collect();
    checks.push(NamedCheck::new(
        "all_zip",
        CheckStatus::from_bool(all_zip),
        if all_zip { "no PV buses".to_string() } else { format!("PV buses {}", bus_list(&pv)) },
    ));
    let lemma_detail = if lemma1.verdict {
        format!("connected, diagonally dominant, strict at slack-adjacent buses {}", bus_list(&lemma1.slack_adjacent))
    } else {
        let codes: Vec<&str> = lemma1.reasons.iter().map(|r| r.code()).collect();
        codes.join(",")
    };
    checks.push(NamedCheck::new("lemma1", CheckStatus::from_bool(lemma1.verdict), lemma_detail));
    checks.push(match &theorem1 {
        None => NamedCheck::new("theorem1", CheckStatus::NotApplicable, "network is lossy"),
        Some(t) => {
            let detail = if t.overall {
                "Φ_im irreducibly diagonally dominant".to_string()
            } else {
                format!(
                    "weak dominance fails at {}; strict near slack: {}; irreducible: {}",
                    bus_list(&t.violated_buses()),
                    t.strict_at_slack_adjacent,
                    t.irreducible
                )
            };
            NamedCheck::new("theorem1", CheckStatus::from_bool(t.overall), detail)
        }
    });
    CaseDiagnosis { lossless, max_conductance, slack_unity, all_zip, lemma1, theorem1, checks }
}

/// The concrete method `auto` stands for on this case.
pub fn resolve_method(requested: Method, diag: &CaseDiagnosis, override_conditions: bool) -> Method {
    if requested != Method::Auto {
        return requested;
    }
    let theorem1 = diag.theorem1.as_ref().is_some_and(|t| t.overall);
    if diag.lossless && diag.slack_unity && (theorem1 || override_conditions) {
        Method::Lossless
    } else if diag.all_zip && diag.lemma1.verdict {
        Method::NoLoad
    } else {
        Method::General
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCell {
    pub voltage: Complex64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusRow {
    pub bus: usize,
    pub v_nom: Complex64,
    pub dv: Complex64,
    pub vmag: f64,
    pub theta_deg: f64,
    pub p_hot: f64,
    pub q_hot: f64,
    pub oracle: Option<OracleCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_mismatch: f64,
    pub max_abs_err: f64,
    pub err_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method_requested: Method,
    pub method_resolved: Method,
    pub solution_method: Option<SolutionMethod>,
    pub n: usize,
    pub s_hot_norm: f64,
    pub p_hot_norm: f64,
    pub q_hot_norm: f64,
    /// Largest nonlinear balance error at `V + ΔV`; only the active part counts at PV buses.
    pub max_mismatch: f64,
    pub condition_estimate: Option<f64>,
    pub pivot_ratio: Option<f64>,
    pub conditions_overridden: bool,
    /// Method-specific scalar diagnostics in a fixed order.
    pub metrics: Vec<(String, f64)>,
    pub oracle: Option<OracleSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<BusRow>,
    pub checks: Vec<NamedCheck>,
    pub bounds: Vec<BoundCheck>,
    pub summary: Summary,
    /// Wall-clock seconds per stage, only when requested.
    pub timings: Option<Vec<(String, f64)>>,
}

/// A linear (or decoupled) estimate before certification.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub method: Method,
    pub nominal: NominalVoltage,
    pub dv: DVector<Complex64>,
    pub solution_method: Option<SolutionMethod>,
    pub condition_estimate: Option<f64>,
    pub pivot_ratio: Option<f64>,
    pub conditions_overridden: bool,
    pub bounds: Vec<BoundCheck>,
    pub metrics: Vec<(String, f64)>,
    pub decoupled: Option<DecoupledEstimate>,
}

impl Estimate {
    pub fn approx_voltage(&self) -> DVector<Complex64> {
        &self.nominal.values + &self.dv
    }
}

fn require_zip(case: &NetworkCase) -> Result<()> {
    match case.non_slack().iter().find(|b| !matches!(b.kind, BusKind::Zip)) {
        Some(b) => Err(Error::NonZipBusPresent { bus: b.id.0 }),
        None => Ok(()),
    }
}

/// Runs one concrete method (not `Auto`) on a case.
pub fn estimate(
    case: &NetworkCase,
    p: &AdmittancePartition,
    method: Method,
    opts: &PipelineOptions,
) -> Result<Estimate> {
    let from_solution = |sol: crate::linearize::LinearSolution, bounds, metrics| Estimate {
        method,
        solution_method: Some(sol.method),
        condition_estimate: sol.diagnostics.condition_estimate,
        pivot_ratio: sol.diagnostics.pivot_ratio,
        conditions_overridden: sol.diagnostics.conditions_overridden,
        nominal: sol.nominal,
        dv: sol.dv,
        bounds,
        metrics,
        decoupled: None,
    };
    match method {
        Method::Auto => {
            let diag = diagnose(case, p);
            estimate(case, p, resolve_method(Method::Auto, &diag, opts.override_conditions), opts)
        }
        Method::General => {
            let sol = solve_general(case, p, &NominalVoltage::flat(p.n()))?;
            Ok(from_solution(sol, Vec::new(), Vec::new()))
        }
        Method::NoLoad | Method::Bolognani => {
            let sol = if method == Method::NoLoad {
                solve_distribution(p, case)?
            } else {
                solve_bolognani_special(p, case)?
            };
            let value = compute_shot(p, &sol.dv)?.s_norm;
            let bound = BoundCheck::new("s_hot_distribution", value, shot_bound_distribution(p, &sol), 1e-12);
            Ok(from_solution(sol, vec![bound], Vec::new()))
        }
        Method::Lossless => {
            let sys = LosslessSystem::new(p, case)?;
            let adjacent: Vec<BusId> = p.slack_adjacent().into_iter().map(BusId::from_index).collect();
            let sol = solve_lossless_flat(&sys, &adjacent, opts.override_conditions)?;
            let shot = compute_shot(p, &sol.dv)?;
            let p_norm = sys.p.norm();
            let bounds = vec![
                BoundCheck::new("p_hot_zero", shot.p_norm, IDENTITY_RTOL * (1.0 + p_norm), 0.0),
                BoundCheck::new("q_hot_lossless", shot.q_norm, qhot_bound(&sys, &sol), 1e-12),
            ];
            Ok(from_solution(sol, bounds, Vec::new()))
        }
        Method::Dc => {
            let sol = classical_dc_solution(p, case, opts.dc_keep_gsh)?;
            let metrics = vec![("dc_shunt_conductance_error".to_string(), dc_shunt_conductance_error(p)?)];
            Ok(from_solution(sol, Vec::new(), metrics))
        }
        Method::Decoupled => {
            require_zip(case)?;
            let nominal =
                crate::linearize::compute_noload_voltage(p, &case.load_currents(), case.slack_voltage())?;
            let est = decoupled_estimate(p, &nominal, &case.scheduled_power())?;
            let approx = DVector::from_fn(p.n(), |i, _| Complex64::from_polar(est.magnitude[i], est.angle[i]));
            let dv = &approx - &nominal.values;
            let metrics = vec![
                ("susceptance_norm".to_string(), est.susceptance_norm),
                ("max_abs_nominal_angle".to_string(), est.max_abs_angle),
            ];
            Ok(Estimate {
                method,
                nominal,
                dv,
                solution_method: None,
                condition_estimate: None,
                pivot_ratio: None,
                conditions_overridden: false,
                bounds: Vec::new(),
                metrics,
                decoupled: Some(est),
            })
        }
    }
}

/// Residual rows that the method enforces: every complex row, or only the
/// active part for flat-voltage methods and PV buses.
fn enforced_gap(case: &NetworkCase, active_only: bool, a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    case.non_slack()
        .iter()
        .enumerate()
        .map(|(i, bus)| {
            let d = a[i] - b[i];
            if active_only || bus.is_pv() {
                d.re.abs()
            } else {
                d.norm()
            }
        })
        .fold(0.0, f64::max)
}

/// Identity checks tying the exact balance error to the dropped term.
pub fn identity_checks(
    case: &NetworkCase,
    p: &AdmittancePartition,
    est: &Estimate,
    shot: &ResidualReport,
    mismatch: &DVector<Complex64>,
) -> Result<Vec<NamedCheck>> {
    let scale = 1.0 + norm2(&case.scheduled_power());
    let tol = IDENTITY_RTOL * scale;
    let Some(method) = est.solution_method else {
        return Ok(vec![
            NamedCheck::new("expansion_identity", CheckStatus::NotApplicable, "decoupled estimate"),
            NamedCheck::new("mismatch_equals_shot", CheckStatus::NotApplicable, "decoupled estimate"),
        ]);
    };
    let coeffs = assemble_coefficients(p, &est.nominal, &case.load_currents(), case.slack_voltage())?;
    let lin = coeffs.linear_residual(&est.dv, &case.scheduled_power());
    let expanded = &shot.s_hot + &lin;
    let gap_expansion = (mismatch - &expanded).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap_shot = enforced_gap(case, method.active_rows_only(), mismatch, &shot.s_hot);
    let rows = if method.active_rows_only() { "active rows" } else { "enforced rows" };
    Ok(vec![
        NamedCheck::new(
            "expansion_identity",
            CheckStatus::from_bool(gap_expansion <= tol),
            format!("max |mismatch - S_hot - linear residual| = {gap_expansion:.3e} (tol {tol:.3e})"),
        ),
        NamedCheck::new(
            "mismatch_equals_shot",
            CheckStatus::from_bool(gap_shot <= tol),
            format!("max |mismatch - S_hot| over {rows} = {gap_shot:.3e} (tol {tol:.3e})"),
        ),
    ])
}

fn max_balance_error(case: &NetworkCase, mismatch: &DVector<Complex64>) -> f64 {
    enforced_gap(case, false, mismatch, &DVector::zeros(mismatch.len()))
}

pub fn run_pipeline(case: &NetworkCase, opts: &PipelineOptions) -> Result<RunReport> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let p = build_admittance(case);
    let diag = diagnose(case, &p);
    let resolved = resolve_method(opts.method, &diag, opts.override_conditions);
    lap("assemble", &mut timings);

    let est = estimate(case, &p, resolved, opts)?;
    lap("solve", &mut timings);

    let approx = est.approx_voltage();
    let shot = compute_shot(&p, &est.dv)?;
    let mismatch = nonlinear_mismatch(&p, &approx, case);
    let mut checks = diag.checks.clone();
    checks.extend(identity_checks(case, &p, &est, &shot, &mismatch)?);
    let mut bounds = shot.bounds.clone();
    bounds.extend(est.bounds.iter().cloned());
    lap("residuals", &mut timings);

    let oracle: Option<NewtonResult> = if opts.with_oracle {
        Some(solve_newton(&p, case, &opts.newton)?)
    } else {
        None
    };
    if oracle.is_some() {
        lap("oracle", &mut timings);
    }

    let rows = (0..p.n())
        .map(|i| {
            let (vmag, theta) = match (&est.decoupled, est.solution_method) {
                (Some(d), _) => (d.magnitude[i], d.angle[i]),
                // Small-angle map of the DC model: θ = ΔV_im on a unit magnitude.
                (None, Some(SolutionMethod::ClassicalDc)) => (est.nominal.values[i].norm(), est.dv[i].im),
                _ => (approx[i].norm(), approx[i].im.atan2(approx[i].re)),
            };
            BusRow {
                bus: case.non_slack()[i].id.0,
                v_nom: est.nominal.values[i],
                dv: est.dv[i],
                vmag,
                theta_deg: theta.to_degrees(),
                p_hot: shot.p_hot[i],
                q_hot: shot.q_hot[i],
                oracle: oracle.as_ref().map(|r| OracleCell {
                    voltage: r.voltage[i],
                    abs_err: (approx[i] - r.voltage[i]).norm(),
                }),
            }
        })
        .collect::<Vec<_>>();

    let oracle_summary = oracle.as_ref().map(|r| OracleSummary {
        converged: r.converged,
        iterations: r.iterations,
        final_mismatch: r.final_mismatch,
        max_abs_err: rows.iter().filter_map(|row| row.oracle.as_ref()).map(|o| o.abs_err).fold(0.0, f64::max),
        err_norm: norm2(&(&approx - &r.voltage)),
    });
    if let Some(o) = &oracle_summary {
        checks.push(NamedCheck::new(
            "oracle_converged",
            CheckStatus::from_bool(o.converged),
            format!("{} iterations, final mismatch {:.3e}", o.iterations, o.final_mismatch),
        ));
    }

    let summary = Summary {
        method_requested: opts.method,
        method_resolved: resolved,
        solution_method: est.solution_method,
        n: p.n(),
        s_hot_norm: shot.s_norm,
        p_hot_norm: shot.p_norm,
        q_hot_norm: shot.q_norm,
        max_mismatch: max_balance_error(case, &mismatch),
        condition_estimate: est.condition_estimate,
        pivot_ratio: est.pivot_ratio,
        conditions_overridden: est.conditions_overridden,
        metrics: est.metrics.clone(),
        oracle: oracle_summary,
    };
    Ok(RunReport { rows, checks, bounds, summary, timings: opts.timings.then_some(timings) })
}

/// Structural diagnostics only.
pub fn run_check(case: &NetworkCase) -> CaseDiagnosis {
    diagnose(case, &build_admittance(case))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub alpha: f64,
    pub method: Method,
    /// `‖V_newton − V_linear‖₂`.
    pub err_norm: f64,
    pub err_over_alpha2: f64,
    pub s_hot_norm: f64,
    pub oracle_iterations: usize,
    pub oracle_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub method_requested: Method,
    pub rows: Vec<CompareRow>,
}

fn compare_point(case: &NetworkCase, alpha: f64, opts: &PipelineOptions) -> Result<CompareRow> {
    let scaled = case.with_scaled_power(alpha);
    let p = build_admittance(&scaled);
    let diag = diagnose(&scaled, &p);
    let method = resolve_method(opts.method, &diag, opts.override_conditions);
    let est = estimate(&scaled, &p, method, opts)?;
    let shot = compute_shot(&p, &est.dv)?;
    let newton = solve_newton(&p, &scaled, &opts.newton)?;
    let err_norm = norm2(&(est.approx_voltage() - &newton.voltage));
    Ok(CompareRow {
        alpha,
        method,
        err_norm,
        err_over_alpha2: err_norm / (alpha * alpha),
        s_hot_norm: shot.s_norm,
        oracle_iterations: newton.iterations,
        oracle_converged: newton.converged,
    })
}

/// Linear estimate against the Newton oracle at each loading factor `α`
/// (constant-power injections scaled by `α`). Points are evaluated
/// concurrently and reported in input order.
pub fn compare_sweep(case: &NetworkCase, alphas: &[f64], opts: &PipelineOptions) -> Result<CompareReport> {
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::Validation(vec![format!("loading factor must be positive, got {a}")]));
    }
    let rows = par::map(alphas, |&alpha| compare_point(case, alpha, opts)).into_iter().collect::<Result<_>>()?;
    Ok(CompareReport { method_requested: opts.method, rows })
}
