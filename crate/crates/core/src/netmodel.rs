//! Network data model and the partitioned bus admittance matrix.
//!
//! Buses are numbered `1..=N+1` with the slack bus last. Internally the `N`
//! non-slack buses occupy positions `0..N` of every vector and matrix.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{im_mat, im_vec, re_mat, re_vec};

/// Tolerance used when comparing row sums for diagonal dominance.
pub const DOMINANCE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BusId(pub usize);

impl BusId {
    /// Zero-based position of a non-slack bus in `Y`, `Ȳ` and all `N`-vectors.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        BusId(index + 1)
    }
}

impl std::fmt::Display for BusId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Constant-impedance, constant-current and constant-power parts of a bus load.
/// Power follows the injection convention: consumption is negative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZipLoad {
    pub shunt_admittance: Complex64,
    pub current: Complex64,
    pub power: Complex64,
}

impl ZipLoad {
    pub fn constant_power(power: Complex64) -> Self {
        ZipLoad { power, ..Default::default() }
    }

    pub fn with_current(mut self, current: Complex64) -> Self {
        self.current = current;
        self
    }

    pub fn with_shunt(mut self, shunt_admittance: Complex64) -> Self {
        self.shunt_admittance = shunt_admittance;
        self
    }

    fn is_finite(&self) -> bool {
        [self.shunt_admittance, self.current, self.power]
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusKind {
    /// Reference bus with voltage `magnitude ∠ angle` (radians).
    Slack { magnitude: f64, angle: f64 },
    /// Generator bus with fixed active injection and voltage magnitude.
    Pv { p: f64, magnitude: f64 },
    Zip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub zip: ZipLoad,
}

impl Bus {
    pub fn slack(id: BusId, magnitude: f64, angle: f64) -> Self {
        Bus { id, kind: BusKind::Slack { magnitude, angle }, zip: ZipLoad::default() }
    }

    pub fn pv(id: BusId, p: f64, magnitude: f64) -> Self {
        Bus { id, kind: BusKind::Pv { p, magnitude }, zip: ZipLoad::default() }
    }

    pub fn zip(id: BusId, zip: ZipLoad) -> Self {
        Bus { id, kind: BusKind::Zip, zip }
    }

    pub fn with_zip(mut self, zip: ZipLoad) -> Self {
        self.zip = zip;
        self
    }

    pub fn is_slack(&self) -> bool {
        matches!(self.kind, BusKind::Slack { .. })
    }

    pub fn is_pv(&self) -> bool {
        matches!(self.kind, BusKind::Pv { .. })
    }

    /// Scheduled complex injection. At PV buses only the real part is
    /// meaningful; the reactive part is whatever the ZIP load specifies.
    pub fn scheduled_power(&self) -> Complex64 {
        match self.kind {
            BusKind::Pv { p, .. } => self.zip.power + p,
            _ => self.zip.power,
        }
    }
}

/// π-model branch; the total shunt is split evenly between both terminals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub series_admittance: Complex64,
    pub shunt_admittance_total: Complex64,
}

impl Branch {
    pub fn new(from: BusId, to: BusId, series_admittance: Complex64) -> Self {
        Branch { from, to, series_admittance, shunt_admittance_total: Complex64::new(0.0, 0.0) }
    }

    /// Branch from a series impedance `r + jx`.
    pub fn from_impedance(from: BusId, to: BusId, r: f64, x: f64) -> Self {
        Self::new(from, to, Complex64::new(1.0, 0.0) / Complex64::new(r, x))
    }

    pub fn with_shunt(mut self, shunt_admittance_total: Complex64) -> Self {
        self.shunt_admittance_total = shunt_admittance_total;
        self
    }
}

/// A validated network: buses `1..=N+1` in order, slack bus `N+1`, connected.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    base_mva: f64,
}

impl NetworkCase {
    /// Validates and stores a case. Every violation is reported, not just the first.
    pub fn new(mut buses: Vec<Bus>, branches: Vec<Branch>, base_mva: f64) -> Result<Self> {
        let mut errors = Vec::new();
        buses.sort_by_key(|b| b.id);
        let count = buses.len();

        if !(base_mva > 0.0 && base_mva.is_finite()) {
            errors.push(format!("base_mva must be positive, got {base_mva}"));
        }
        if count < 2 {
            errors.push(format!("need at least two buses, got {count}"));
        }
        for pair in buses.windows(2) {
            if pair[0].id == pair[1].id {
                errors.push(format!("duplicate bus id {}", pair[0].id));
            }
        }
        for (pos, bus) in buses.iter().enumerate() {
            if bus.id.0 != pos + 1 && !buses.windows(2).any(|w| w[0].id == w[1].id) {
                errors.push(format!("bus ids must be contiguous 1..={count}; found {}", bus.id));
                break;
            }
        }
        let slacks: Vec<&Bus> = buses.iter().filter(|b| b.is_slack()).collect();
        if slacks.len() != 1 {
            errors.push(format!("exactly one slack bus required, found {}", slacks.len()));
        } else if slacks[0].id.0 != count {
            errors.push(format!(
                "slack bus must have the highest id ({count}), found {}",
                slacks[0].id
            ));
        }
        for bus in &buses {
            if !bus.zip.is_finite() {
                errors.push(format!("bus {}: non-finite load data", bus.id));
            }
            match bus.kind {
                BusKind::Slack { magnitude, angle } => {
                    if !(magnitude > 0.0 && magnitude.is_finite()) || !angle.is_finite() {
                        errors.push(format!("bus {}: slack voltage magnitude must be > 0", bus.id));
                    }
                }
                BusKind::Pv { p, magnitude } => {
                    if !(magnitude > 0.0 && magnitude.is_finite()) || !p.is_finite() {
                        errors.push(format!("bus {}: PV voltage setpoint must be > 0", bus.id));
                    }
                }
                BusKind::Zip => {}
            }
        }
        for (k, br) in branches.iter().enumerate() {
            let valid = |id: BusId| id.0 >= 1 && id.0 <= count;
            if !valid(br.from) || !valid(br.to) {
                errors.push(format!("branch {k}: references unknown bus ({} -> {})", br.from, br.to));
            } else if br.from == br.to {
                errors.push(format!("branch {k}: from and to are both bus {}", br.from));
            }
            let finite = [br.series_admittance, br.shunt_admittance_total]
                .iter()
                .all(|c| c.re.is_finite() && c.im.is_finite());
            if !finite {
                errors.push(format!("branch {k}: non-finite admittance"));
            } else if br.series_admittance.norm() == 0.0 {
                errors.push(format!("branch {k}: zero series admittance"));
            }
        }
        if errors.is_empty() && !graph_connected(count, &branches) {
            errors.push("network graph is disconnected".to_string());
        }
        if errors.is_empty() {
            Ok(NetworkCase { buses, branches, base_mva })
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    /// Number of non-slack buses `N`.
    pub fn n(&self) -> usize {
        self.buses.len() - 1
    }

    pub fn non_slack(&self) -> &[Bus] {
        &self.buses[..self.n()]
    }

    pub fn slack(&self) -> &Bus {
        &self.buses[self.n()]
    }

    /// `V_o e^{jθ_o}`.
    pub fn slack_voltage(&self) -> Complex64 {
        match self.slack().kind {
            BusKind::Slack { magnitude, angle } => Complex64::from_polar(magnitude, angle),
            _ => unreachable!("validated case has the slack bus last"),
        }
    }

    /// Constant-current load vector `I_L`.
    pub fn load_currents(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.n(), self.non_slack().iter().map(|b| b.zip.current))
    }

    /// Scheduled complex injections `S`.
    pub fn scheduled_power(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.n(), self.non_slack().iter().map(|b| b.scheduled_power()))
    }

    pub fn active_power(&self) -> DVector<f64> {
        re_vec(&self.scheduled_power())
    }

    pub fn has_pv(&self) -> bool {
        self.buses.iter().any(|b| b.is_pv())
    }

    pub fn is_all_zip(&self) -> bool {
        self.non_slack().iter().all(|b| matches!(b.kind, BusKind::Zip))
    }

    /// Copy with every constant-power injection (ZIP power and PV active
    /// setpoints) multiplied by `alpha`.
    pub fn with_scaled_power(&self, alpha: f64) -> NetworkCase {
        let mut out = self.clone();
        for bus in &mut out.buses {
            bus.zip.power *= alpha;
            if let BusKind::Pv { p, magnitude } = bus.kind {
                bus.kind = BusKind::Pv { p: p * alpha, magnitude };
            }
        }
        out
    }

    /// Copy with the constant-current loads removed.
    pub fn without_current_loads(&self) -> NetworkCase {
        let mut out = self.clone();
        for bus in &mut out.buses {
            bus.zip.current = Complex64::new(0.0, 0.0);
        }
        out
    }
}

fn graph_connected(count: usize, branches: &[Branch]) -> bool {
    let mut adj = vec![Vec::new(); count];
    for br in branches {
        adj[br.from.index()].push(br.to.index());
        adj[br.to.index()].push(br.from.index());
    }
    let mut seen = vec![false; count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `[[Y, Ȳ], [Ȳᵀ, y]]` split of the full bus admittance matrix, plus the
/// shunt vector `Y_sh = Y·1 + Ȳ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittancePartition {
    pub y: DMatrix<Complex64>,
    pub ybar: DVector<Complex64>,
    pub y_slack: Complex64,
    pub ysh: DVector<Complex64>,
}

impl AdmittancePartition {
    pub fn n(&self) -> usize {
        self.ybar.len()
    }

    pub fn g(&self) -> DMatrix<f64> {
        re_mat(&self.y)
    }

    pub fn b(&self) -> DMatrix<f64> {
        im_mat(&self.y)
    }

    pub fn gsh(&self) -> DVector<f64> {
        re_vec(&self.ysh)
    }

    pub fn bsh(&self) -> DVector<f64> {
        im_vec(&self.ysh)
    }

    /// Reassembled `(N+1)×(N+1)` matrix.
    pub fn full(&self) -> DMatrix<Complex64> {
        let n = self.n();
        let mut full = DMatrix::zeros(n + 1, n + 1);
        full.view_mut((0, 0), (n, n)).copy_from(&self.y);
        for i in 0..n {
            full[(i, n)] = self.ybar[i];
            full[(n, i)] = self.ybar[i];
        }
        full[(n, n)] = self.y_slack;
        full
    }

    /// Non-slack positions with a branch to the slack bus.
    pub fn slack_adjacent(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.ybar[i].norm() > 0.0).collect()
    }

    /// Largest conductance magnitude anywhere in the network (`G`, slack
    /// coupling and shunts).
    pub fn max_conductance(&self) -> f64 {
        let g = self.y.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let gbar = self.ybar.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let gsh = self.ysh.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        g.max(gbar).max(gsh)
    }
}

/// Stamps every branch and bus shunt into the full admittance matrix and
/// partitions it. Parallel branches add.
pub fn build_admittance(case: &NetworkCase) -> AdmittancePartition {
    let total = case.buses().len();
    let mut full = DMatrix::<Complex64>::zeros(total, total);
    for br in case.branches() {
        let (f, t) = (br.from.index(), br.to.index());
        let ys = br.series_admittance;
        let half = br.shunt_admittance_total * 0.5;
        full[(f, f)] += ys + half;
        full[(t, t)] += ys + half;
        full[(f, t)] -= ys;
        full[(t, f)] -= ys;
    }
    for bus in case.buses() {
        let i = bus.id.index();
        full[(i, i)] += bus.zip.shunt_admittance;
    }
    let n = case.n();
    let y = full.view((0, 0), (n, n)).into_owned();
    let ybar = full.view((0, n), (n, 1)).column(0).into_owned();
    let mut partition = AdmittancePartition { y, ybar, y_slack: full[(n, n)], ysh: DVector::zeros(n) };
    partition.ysh = extract_shunts(&partition);
    partition
}

/// `Y_sh = Y·1_N + Ȳ`.
pub fn extract_shunts(p: &AdmittancePartition) -> DVector<Complex64> {
    let ones = DVector::from_element(p.n(), Complex64::new(1.0, 0.0));
    &p.y * ones + &p.ybar
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma1Reason {
    /// The graph of `Y` (slack removed) is not connected.
    ReducedGraphDisconnected,
    /// `|y_ℓℓ| < Σ_{m≠ℓ} |y_ℓm|` at some bus.
    NotDiagonallyDominant,
    /// A slack-adjacent bus is not strictly dominant.
    NotStrictAtSlackAdjacent,
    /// `I_L = Ȳ V_slack`, so the no-load voltage is zero.
    NoLoadVoltageZero,
}

impl Lemma1Reason {
    pub fn code(self) -> &'static str {
        match self {
            Lemma1Reason::ReducedGraphDisconnected => "REDUCED_GRAPH_DISCONNECTED",
            Lemma1Reason::NotDiagonallyDominant => "NOT_DIAGONALLY_DOMINANT",
            Lemma1Reason::NotStrictAtSlackAdjacent => "NOT_STRICT_AT_SLACK_ADJACENT",
            Lemma1Reason::NoLoadVoltageZero => "NO_LOAD_VOLTAGE_ZERO",
        }
    }
}

/// Outcome of the structural checks that make `diag(V*)Y` nonsingular at the
/// no-load voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Diagnosis {
    pub connected: bool,
    /// Per bus: `|y_ℓℓ| ≥ Σ_{m≠ℓ} |y_ℓm|`.
    pub weakly_dominant: Vec<bool>,
    /// Per bus: strict version of the above.
    pub strictly_dominant: Vec<bool>,
    pub slack_adjacent: Vec<BusId>,
    pub strict_at_slack_adjacent: bool,
    pub current_condition: bool,
    pub reasons: Vec<Lemma1Reason>,
    pub verdict: bool,
}

impl Lemma1Diagnosis {
    pub fn structure_holds(&self) -> bool {
        self.connected && self.weakly_dominant.iter().all(|&w| w) && self.strict_at_slack_adjacent
    }
}

/// Connectivity of the graph induced by the nonzero off-diagonal entries of a
/// square matrix.
pub fn matrix_graph_connected<T>(n: usize, nonzero: T) -> bool
where
    T: Fn(usize, usize) -> bool,
{
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for (v, s) in seen.iter_mut().enumerate() {
            if !*s && v != u && (nonzero(u, v) || nonzero(v, u)) {
                *s = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn check_lemma1_structure(
    p: &AdmittancePartition,
    i_load: &DVector<Complex64>,
    v_slack: Complex64,
) -> Lemma1Diagnosis {
    let n = p.n();
    let connected = matrix_graph_connected(n, |i, j| p.y[(i, j)].norm() > 0.0);
    let mut weakly_dominant = Vec::with_capacity(n);
    let mut strictly_dominant = Vec::with_capacity(n);
    for l in 0..n {
        let diag = p.y[(l, l)].norm();
        let off: f64 = (0..n).filter(|&m| m != l).map(|m| p.y[(l, m)].norm()).sum();
        let slack = DOMINANCE_RTOL * diag.max(off);
        weakly_dominant.push(diag >= off - slack);
        strictly_dominant.push(diag > off + slack);
    }
    let adjacent = p.slack_adjacent();
    let strict_at_slack_adjacent = !adjacent.is_empty() && adjacent.iter().all(|&i| strictly_dominant[i]);
    let current_condition = i_load
        .iter()
        .zip(p.ybar.iter())
        .any(|(il, yb)| (il - yb * v_slack).norm() > 1e-12);

    let mut reasons = Vec::new();
    if !connected {
        reasons.push(Lemma1Reason::ReducedGraphDisconnected);
    }
    if !weakly_dominant.iter().all(|&w| w) {
        reasons.push(Lemma1Reason::NotDiagonallyDominant);
    }
    if !strict_at_slack_adjacent {
        reasons.push(Lemma1Reason::NotStrictAtSlackAdjacent);
    }
    if !current_condition {
        reasons.push(Lemma1Reason::NoLoadVoltageZero);
    }
    Lemma1Diagnosis {
        connected,
        weakly_dominant,
        strictly_dominant,
        slack_adjacent: adjacent.into_iter().map(BusId::from_index).collect(),
        strict_at_slack_adjacent,
        current_condition,
        verdict: reasons.is_empty(),
        reasons,
    }
}
