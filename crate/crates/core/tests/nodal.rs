//! No-load voltage against Gauss-Seidel nodal analysis of the `S = 0` circuit.

use nalgebra::DVector;
use num_complex::Complex64;
use rectflow::linearize::compute_noload_voltage;
use rectflow::netmodel::{build_admittance, Branch, Bus, BusId, NetworkCase, ZipLoad};
use rectflow::synth::{self, FeederOptions};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Kirchhoff's current law at every non-slack bus, iterated bus by bus over
/// the branch list until the update stalls.
fn gauss_seidel(case: &NetworkCase) -> DVector<Complex64> {
    let n = case.n();
    let vs = case.slack_voltage();
    let voltage = |v: &[Complex64], id: BusId| if id.0 == n + 1 { vs } else { v[id.0 - 1] };
    let mut v = vec![vs; n];
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for l in 0..n {
            let here = BusId::from_index(l);
            let bus = &case.non_slack()[l];
            let mut self_adm = bus.zip.shunt_admittance;
            let mut inflow = bus.zip.current;
            for br in case.branches() {
                let other = if br.from == here {
                    br.to
                } else if br.to == here {
                    br.from
                } else {
                    continue;
                };
                self_adm += br.series_admittance + br.shunt_admittance_total / 2.0;
                inflow += br.series_admittance * voltage(&v, other);
            }
            let new = inflow / self_adm;
            change = change.max((new - v[l]).norm());
            v[l] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
    DVector::from_vec(v)
}

#[test]
fn radial_four_bus_with_current_loads() {
    let zip = |a: f64| ZipLoad::default().with_current(c(-a, 0.4 * a)).with_shunt(c(0.01, -0.005));
    let case = NetworkCase::new(
        vec![
            Bus::zip(BusId(1), zip(0.02)),
            Bus::zip(BusId(2), zip(0.05)),
            Bus::zip(BusId(3), zip(0.0)),
            Bus::zip(BusId(4), zip(0.03)),
            Bus::slack(BusId(5), 1.02, 0.05),
        ],
        vec![
            Branch::from_impedance(BusId(5), BusId(1), 0.01, 0.03),
            Branch::from_impedance(BusId(1), BusId(2), 0.02, 0.05).with_shunt(c(0.0, 0.02)),
            Branch::from_impedance(BusId(2), BusId(3), 0.03, 0.04),
            Branch::from_impedance(BusId(1), BusId(4), 0.02, 0.02),
        ],
        100.0,
    )
    .unwrap();
    let p = build_admittance(&case);
    let v = compute_noload_voltage(&p, &case.load_currents(), case.slack_voltage()).unwrap();
    assert!((v.values - gauss_seidel(&case)).camax() < 1e-12);
}

#[test]
fn random_feeders_and_meshes() {
    for seed in 0..10 {
        let opts = FeederOptions { x_over_r: (0.5, 4.0), slack_voltage: (1.01, -0.03), ..Default::default() };
        for case in [synth::radial_feeder(12, seed, &opts), synth::meshed_network(10, seed)] {
            let p = build_admittance(&case);
            let v = compute_noload_voltage(&p, &case.load_currents(), case.slack_voltage()).unwrap();
            assert!((v.values - gauss_seidel(&case)).camax() < 1e-11, "seed {seed}");
        }
    }
}
