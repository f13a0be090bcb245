//! Seeded synthetic networks for tests, sweeps and benchmarks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netmodel::{Branch, Bus, BusId, NetworkCase, ZipLoad};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Slack bus connected to a single ZIP bus through `series_admittance`.
pub fn ladder(series_admittance: Complex64, load: ZipLoad) -> NetworkCase {
    NetworkCase::new(
        vec![Bus::zip(BusId(1), load), Bus::slack(BusId(2), 1.0, 0.0)],
        vec![Branch::new(BusId(1), BusId(2), series_admittance)],
        100.0,
    )
    .expect("ladder is valid")
}

#[derive(Debug, Clone)]
pub struct FeederOptions {
    /// Range of x/r ratios; equal bounds give a uniform ratio.
    pub x_over_r: (f64, f64),
    pub current_loads: bool,
    pub zip_shunts: bool,
    /// Multiplies the constant-power loads.
    pub load_scale: f64,
    pub slack_voltage: (f64, f64),
}

impl Default for FeederOptions {
    fn default() -> Self {
        FeederOptions {
            x_over_r: (2.0, 2.0),
            current_loads: true,
            zip_shunts: true,
            load_scale: 1.0,
            slack_voltage: (1.0, 0.0),
        }
    }
}

/// Random radial ZIP feeder with `n` non-slack buses and a single slack branch.
pub fn radial_feeder(n: usize, seed: u64, opts: &FeederOptions) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = BusId(n + 1);
    let mut buses = Vec::with_capacity(n + 1);
    let mut branches = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 { slack } else { BusId::from_index(rng.random_range(0..i)) };
        let r = rng.random_range(0.01..0.05);
        let ratio = if opts.x_over_r.0 == opts.x_over_r.1 {
            opts.x_over_r.0
        } else {
            rng.random_range(opts.x_over_r.0..opts.x_over_r.1)
        };
        branches.push(Branch::from_impedance(parent, BusId::from_index(i), r, ratio * r));

        let p = -rng.random_range(0.01..0.08) * opts.load_scale;
        let q = p * rng.random_range(0.2..0.6);
        let mut zip = ZipLoad::constant_power(c(p, q));
        if opts.current_loads {
            let a = rng.random_range(0.005..0.03);
            zip = zip.with_current(c(-a, a * rng.random_range(0.1..0.5)));
        }
        if opts.zip_shunts {
            zip = zip.with_shunt(c(rng.random_range(0.0..0.02), -rng.random_range(0.0..0.01)));
        }
        buses.push(Bus::zip(BusId::from_index(i), zip));
    }
    buses.push(Bus::slack(slack, opts.slack_voltage.0, opts.slack_voltage.1));
    NetworkCase::new(buses, branches, 100.0).expect("feeder is valid")
}

/// Fixed 10-bus feeder: a main line 1..6 with laterals 7-8 (off bus 3) and
/// 9-10 (off bus 5), slack bus 11 at the head. One conductor type throughout
/// (x/r = 1.6).
pub fn ten_bus_feeder() -> NetworkCase {
    let lines: [(usize, usize, f64); 10] = [
        (11, 1, 0.010),
        (1, 2, 0.015),
        (2, 3, 0.020),
        (3, 4, 0.020),
        (4, 5, 0.025),
        (5, 6, 0.030),
        (3, 7, 0.030),
        (7, 8, 0.035),
        (5, 9, 0.025),
        (9, 10, 0.030),
    ];
    let loads: [(f64, f64, f64); 10] = [
        (-0.040, -0.015, 0.010),
        (-0.055, -0.020, 0.000),
        (-0.030, -0.012, 0.015),
        (-0.060, -0.025, 0.000),
        (-0.045, -0.018, 0.010),
        (-0.035, -0.010, 0.005),
        (-0.050, -0.022, 0.000),
        (-0.025, -0.008, 0.012),
        (-0.040, -0.016, 0.000),
        (-0.030, -0.012, 0.008),
    ];
    let mut buses: Vec<Bus> = loads
        .iter()
        .enumerate()
        .map(|(i, &(p, q, il))| {
            let zip = ZipLoad::constant_power(c(p, q))
                .with_current(c(-il, 0.3 * il))
                .with_shunt(c(0.005, -0.002));
            Bus::zip(BusId::from_index(i), zip)
        })
        .collect();
    buses.push(Bus::slack(BusId(11), 1.0, 0.0));
    let branches = lines
        .iter()
        .map(|&(f, t, r)| Branch::from_impedance(BusId(f), BusId(t), r, 1.6 * r))
        .collect();
    NetworkCase::new(buses, branches, 100.0).expect("fixed feeder is valid")
}

#[derive(Debug, Clone)]
pub struct LosslessOptions {
    pub current_loads: bool,
    pub line_shunts: bool,
    pub zip_shunts: bool,
    /// Probability that a non-slack bus is a PV bus.
    pub pv_fraction: f64,
}

impl Default for LosslessOptions {
    fn default() -> Self {
        LosslessOptions { current_loads: true, line_shunts: true, zip_shunts: true, pv_fraction: 0.3 }
    }
}

/// Random meshed lossless network (`G = 0` exactly, slack `1∠0`) whose
/// constant-current loads keep `Φ_im` irreducibly diagonally dominant.
///
/// `I_L,im` is zero or large at buses without a slack branch and small at
/// slack-adjacent buses, so the dominance holds whichever sign convention is
/// used for the current term.
pub fn lossless_network(n: usize, seed: u64, opts: &LosslessOptions) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = BusId(n + 1);
    let mut branches = Vec::new();
    let edge = |rng: &mut ChaCha8Rng, a: BusId, b: BusId| {
        let x = rng.random_range(0.05..0.4);
        let mut br = Branch::new(a, b, c(0.0, -1.0 / x));
        if opts.line_shunts {
            br = br.with_shunt(c(0.0, rng.random_range(0.0..0.04)));
        }
        br
    };
    for i in 0..n {
        let parent = if i == 0 { slack } else { BusId::from_index(rng.random_range(0..i)) };
        branches.push(edge(&mut rng, parent, BusId::from_index(i)));
    }
    let extra = n / 2;
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            branches.push(edge(&mut rng, BusId::from_index(a), BusId::from_index(b)));
        }
    }
    if n > 2 && rng.random_bool(0.7) {
        let a = rng.random_range(1..n);
        branches.push(edge(&mut rng, slack, BusId::from_index(a)));
    }

    // Off-diagonal susceptance sums per bus, split by slack / non-slack.
    let mut to_slack = vec![0.0; n];
    let mut to_others = vec![0.0; n];
    for br in &branches {
        let b = -br.series_admittance.im; // b_ℓm of the off-diagonal entry
        for (here, there) in [(br.from, br.to), (br.to, br.from)] {
            if here == slack {
                continue;
            }
            if there == slack {
                to_slack[here.index()] += b;
            } else {
                to_others[here.index()] += b;
            }
        }
    }

    let mut buses = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = rng.random_range(-0.5..0.5);
        let mut zip = if rng.random_bool(opts.pv_fraction) {
            ZipLoad::default()
        } else {
            ZipLoad::constant_power(c(p, rng.random_range(-0.2..0.1)))
        };
        if opts.current_loads {
            let total = to_slack[i] + to_others[i];
            let im = if to_slack[i] > 0.0 {
                rng.random_range(-0.5..0.5) * to_slack[i]
            } else if rng.random_bool(0.5) {
                0.0
            } else {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * total * rng.random_range(2.5..4.0)
            };
            zip = zip.with_current(c(rng.random_range(-0.05..0.05), im));
        }
        if opts.zip_shunts {
            zip = zip.with_shunt(c(0.0, rng.random_range(-0.02..0.02)));
        }
        let bus = if zip.power == c(0.0, 0.0) {
            Bus::pv(BusId::from_index(i), p, rng.random_range(0.98..1.05)).with_zip(zip)
        } else {
            Bus::zip(BusId::from_index(i), zip)
        };
        buses.push(bus);
    }
    buses.push(Bus::slack(slack, 1.0, 0.0));
    NetworkCase::new(buses, branches, 100.0).expect("lossless network is valid")
}

/// Random meshed lossy ZIP-only network with heterogeneous x/r ratios.
pub fn meshed_network(n: usize, seed: u64) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = BusId(n + 1);
    let mut branches = Vec::new();
    let edge = |rng: &mut ChaCha8Rng, a: BusId, b: BusId| {
        let r = rng.random_range(0.01..0.06);
        let x = r * rng.random_range(0.5..4.0);
        Branch::from_impedance(a, b, r, x).with_shunt(c(0.0, rng.random_range(0.0..0.02)))
    };
    for i in 0..n {
        let parent = if i == 0 { slack } else { BusId::from_index(rng.random_range(0..i)) };
        branches.push(edge(&mut rng, parent, BusId::from_index(i)));
    }
    for _ in 0..n / 3 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            branches.push(edge(&mut rng, BusId::from_index(a), BusId::from_index(b)));
        }
    }
    let mut buses = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = rng.random_range(-0.06..0.02);
        let q = rng.random_range(-0.03..0.01);
        let a = rng.random_range(0.0..0.02);
        let zip = ZipLoad::constant_power(c(p, q))
            .with_current(c(-a, 0.3 * a))
            .with_shunt(c(rng.random_range(0.0..0.01), rng.random_range(-0.01..0.01)));
        buses.push(Bus::zip(BusId::from_index(i), zip));
    }
    let angle = rng.random_range(-0.1..0.1);
    buses.push(Bus::slack(slack, rng.random_range(0.98..1.04), angle));
    NetworkCase::new(buses, branches, 100.0).expect("meshed network is valid")
}
