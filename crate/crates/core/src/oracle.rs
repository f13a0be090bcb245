//! Full AC power flow by Newton-Raphson in rectangular coordinates.
//!
//! Unknowns are `[V_re; V_im]`. ZIP buses contribute their `P` and `Q`
//! balance rows, PV buses their `P` row and `|V|² − V_set²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{complex_vec, Lu};
use crate::linearize::compute_noload_voltage;
use crate::netmodel::{AdmittancePartition, BusKind, NetworkCase};

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Flat,
    NoLoad,
    Given(DVector<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSettings {
    /// Largest accepted per-bus mismatch.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial: Initial,
    /// Step halvings tried when a full step increases the mismatch.
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tolerance: 1e-10, max_iterations: 50, initial: Initial::NoLoad, max_halvings: 10 }
    }
}

impl NewtonSettings {
    pub fn starting_at(initial: Initial) -> Self {
        NewtonSettings { initial, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub voltage: DVector<Complex64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_mismatch: f64,
}

impl NewtonResult {
    /// The result if converged, otherwise `MAX_ITERATIONS`.
    pub fn into_converged(self) -> Result<NewtonResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxIterations { iterations: self.iterations, mismatch: self.final_mismatch })
        }
    }
}

fn net_current(p: &AdmittancePartition, v: &DVector<Complex64>, case: &NetworkCase) -> DVector<Complex64> {
    &p.y * v + &p.ybar * case.slack_voltage() - case.load_currents()
}

/// The `2N` Newton residual rows at `v`.
pub fn mismatch_rows(p: &AdmittancePartition, case: &NetworkCase, v: &DVector<Complex64>) -> DVector<f64> {
    let n = p.n();
    let current = net_current(p, v, case);
    let s = case.scheduled_power();
    let mut f = DVector::zeros(2 * n);
    for (l, bus) in case.non_slack().iter().enumerate() {
        let d = v[l] * current[l].conj() - s[l];
        f[l] = d.re;
        f[n + l] = match bus.kind {
            BusKind::Pv { magnitude, .. } => v[l].norm_sqr() - magnitude * magnitude,
            _ => d.im,
        };
    }
    f
}

/// Largest per-bus Euclidean norm of the residual row pair.
pub fn max_bus_mismatch(rows: &DVector<f64>) -> f64 {
    let n = rows.len() / 2;
    (0..n).map(|l| rows[l].hypot(rows[n + l])).fold(0.0, f64::max)
}

/// Analytic Jacobian of [`mismatch_rows`] with respect to `[V_re; V_im]`.
pub fn analytic_jacobian(p: &AdmittancePartition, case: &NetworkCase, v: &DVector<Complex64>) -> DMatrix<f64> {
    let n = p.n();
    let current = net_current(p, v, case);
    let j = Complex64::new(0.0, 1.0);
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for (l, bus) in case.non_slack().iter().enumerate() {
        for k in 0..n {
            let coupling = v[l] * p.y[(l, k)].conj();
            let mut d_re = coupling;
            let mut d_im = -j * coupling;
            if l == k {
                d_re += current[l].conj();
                d_im += j * current[l].conj();
            }
            jac[(l, k)] = d_re.re;
            jac[(l, n + k)] = d_im.re;
            if !matches!(bus.kind, BusKind::Pv { .. }) {
                jac[(n + l, k)] = d_re.im;
                jac[(n + l, n + k)] = d_im.im;
            }
        }
        if matches!(bus.kind, BusKind::Pv { .. }) {
            jac[(n + l, l)] = 2.0 * v[l].re;
            jac[(n + l, n + l)] = 2.0 * v[l].im;
        }
    }
    jac
}

fn with_pv_magnitudes(case: &NetworkCase, mut v: DVector<Complex64>) -> DVector<Complex64> {
    for (l, bus) in case.non_slack().iter().enumerate() {
        if let BusKind::Pv { magnitude, .. } = bus.kind {
            let arg = if v[l].norm() > 0.0 { v[l].arg() } else { 0.0 };
            v[l] = Complex64::from_polar(magnitude, arg);
        }
    }
    v
}

/// Starting point for `initial`. `NoLoad` falls back to `Flat` when the
/// no-load voltage cannot be computed.
pub fn initial_voltage(p: &AdmittancePartition, case: &NetworkCase, initial: &Initial) -> Result<DVector<Complex64>> {
    let n = p.n();
    let flat = || DVector::from_element(n, Complex64::new(1.0, 0.0));
    let v = match initial {
        Initial::Flat => flat(),
        Initial::NoLoad => compute_noload_voltage(p, &case.load_currents(), case.slack_voltage())
            .map(|nom| nom.values)
            .unwrap_or_else(|_| flat()),
        Initial::Given(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("initial voltage has length {}, expected {n}", v.len())));
            }
            return Ok(v.clone());
        }
    };
    Ok(with_pv_magnitudes(case, v))
}

pub fn solve_newton(p: &AdmittancePartition, case: &NetworkCase, settings: &NewtonSettings) -> Result<NewtonResult> {
    let n = p.n();
    let mut v = initial_voltage(p, case, &settings.initial)?;
    let mut rows = mismatch_rows(p, case, &v);
    let mut mismatch = max_bus_mismatch(&rows);
    let mut iterations = 0;
    while mismatch > settings.tolerance && iterations < settings.max_iterations {
        let lu = Lu::factor(&analytic_jacobian(p, case, &v));
        if lu.is_singular() {
            return Err(Error::SingularJacobian { iteration: iterations });
        }
        let step = lu.solve(&(-&rows));
        let mut dv = complex_vec(&step.rows(0, n).into_owned(), &step.rows(n, n).into_owned());
        let mut candidate = &v + &dv;
        let mut cand_rows = mismatch_rows(p, case, &candidate);
        let mut cand_mismatch = max_bus_mismatch(&cand_rows);
        let mut halvings = 0;
        while cand_mismatch > mismatch && halvings < settings.max_halvings {
            dv *= Complex64::new(0.5, 0.0);
            candidate = &v + &dv;
            cand_rows = mismatch_rows(p, case, &candidate);
            cand_mismatch = max_bus_mismatch(&cand_rows);
            halvings += 1;
        }
        v = candidate;
        rows = cand_rows;
        mismatch = cand_mismatch;
        iterations += 1;
    }
    Ok(NewtonResult { voltage: v, converged: mismatch <= settings.tolerance, iterations, final_mismatch: mismatch })
}

/// Central-difference step in per-unit voltage.
pub const FD_STEP: f64 = 1e-6;
/// Entries smaller than this are left out of the relative comparison.
pub const FD_ENTRY_FLOOR: f64 = 1e-8;

/// Largest relative deviation between the analytic Jacobian and central
/// differences of the residual rows at `voltage`.
pub fn jacobian_check(p: &AdmittancePartition, case: &NetworkCase, voltage: &DVector<Complex64>) -> f64 {
    let n = p.n();
    let analytic = analytic_jacobian(p, case, voltage);
    let mut worst = 0.0f64;
    for k in 0..2 * n {
        let delta = if k < n { Complex64::new(FD_STEP, 0.0) } else { Complex64::new(0.0, FD_STEP) };
        let mut plus = voltage.clone();
        let mut minus = voltage.clone();
        plus[k % n] += delta;
        minus[k % n] -= delta;
        let fd = (mismatch_rows(p, case, &plus) - mismatch_rows(p, case, &minus)) / (2.0 * FD_STEP);
        for r in 0..2 * n {
            let a = analytic[(r, k)];
            if a.abs() > FD_ENTRY_FLOOR {
                worst = worst.max((a - fd[r]).abs() / a.abs());
            }
        }
    }
    worst
}
