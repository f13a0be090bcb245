//! TOML case files.
//!
//! ```toml
//! schema_version = "1"
//! base_mva = 100.0
//!
//! [[buses]]
//! id = 1
//! kind = "zip"
//! p = -0.1
//! q = -0.05
//!
//! [[buses]]
//! id = 2
//! kind = "slack"
//! v_setpoint = 1.0
//! theta_deg = 0.0
//!
//! [[branches]]
//! from = 2
//! to = 1
//! series_g = 1.0
//! series_b = -5.0
//! ```
//!
//! `p`/`q` are injections (loads negative), `shunt_g`/`shunt_b` a constant
//! admittance to ground and `i_load_re`/`i_load_im` the constant-current load
//! `I_L`. At a PV bus `p` is the active setpoint. Missing optional numbers
//! read as zero.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Branch, Bus, BusId, BusKind, NetworkCase, ZipLoad};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKindTag {
    Slack,
    Pv,
    Zip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: usize,
    pub kind: BusKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_load_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_load_im: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub series_g: f64,
    pub series_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_b_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: String,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, err: toml::de::Error) -> Error {
    let line = err.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    Error::Parse { line, message: err.message().to_string() }
}

fn value(x: Option<f64>) -> f64 {
    x.unwrap_or(0.0)
}

impl BusRecord {
    fn to_bus(&self, errors: &mut Vec<String>) -> Bus {
        let id = BusId(self.id);
        let mut forbid = |present: bool, field: &str, kind: &str| {
            if present {
                errors.push(format!("bus {id}: field `{field}` is not allowed on a {kind} bus"));
            }
        };
        let zip = ZipLoad {
            shunt_admittance: Complex64::new(value(self.shunt_g), value(self.shunt_b)),
            current: Complex64::new(value(self.i_load_re), value(self.i_load_im)),
            power: Complex64::new(0.0, 0.0),
        };
        match self.kind {
            BusKindTag::Slack => {
                for (present, field) in [
                    (self.p.is_some(), "p"),
                    (self.q.is_some(), "q"),
                    (self.i_load_re.is_some(), "i_load_re"),
                    (self.i_load_im.is_some(), "i_load_im"),
                ] {
                    forbid(present, field, "slack");
                }
                if self.v_setpoint.is_none() {
                    errors.push(format!("bus {id}: slack bus requires `v_setpoint`"));
                }
                Bus::slack(id, value(self.v_setpoint), value(self.theta_deg).to_radians()).with_zip(zip)
            }
            BusKindTag::Pv => {
                forbid(self.q.is_some(), "q", "pv");
                forbid(self.theta_deg.is_some(), "theta_deg", "pv");
                if self.v_setpoint.is_none() {
                    errors.push(format!("bus {id}: pv bus requires `v_setpoint`"));
                }
                Bus::pv(id, value(self.p), value(self.v_setpoint)).with_zip(zip)
            }
            BusKindTag::Zip => {
                forbid(self.v_setpoint.is_some(), "v_setpoint", "zip");
                forbid(self.theta_deg.is_some(), "theta_deg", "zip");
                let power = Complex64::new(value(self.p), value(self.q));
                Bus::zip(id, ZipLoad { power, ..zip })
            }
        }
    }
}

impl CaseFile {
    /// Validates the records and builds the case, reporting every violation.
    pub fn to_case(&self) -> Result<NetworkCase> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                self.schema_version
            ));
        }
        let buses: Vec<Bus> = self.buses.iter().map(|b| b.to_bus(&mut errors)).collect();
        let branches = self
            .branches
            .iter()
            .map(|b| {
                Branch::new(BusId(b.from), BusId(b.to), Complex64::new(b.series_g, b.series_b))
                    .with_shunt(Complex64::new(0.0, value(b.shunt_b_total)))
            })
            .collect();
        match NetworkCase::new(buses, branches, self.base_mva) {
            Ok(case) if errors.is_empty() => Ok(case),
            Ok(_) => Err(Error::Validation(errors)),
            Err(Error::Validation(more)) => {
                errors.extend(more);
                Err(Error::Validation(errors))
            }
            Err(e) => Err(e),
        }
    }

    /// Inverse of [`CaseFile::to_case`]. Fails for data the format cannot
    /// express: constant-power load on a PV bus, load on the slack bus and
    /// branch shunt conductance.
    pub fn from_case(case: &NetworkCase) -> Result<CaseFile> {
        let mut errors = Vec::new();
        let nonzero = |x: f64| if x == 0.0 { None } else { Some(x) };
        let buses = case
            .buses()
            .iter()
            .map(|bus| {
                let z = bus.zip;
                let mut rec = BusRecord {
                    id: bus.id.0,
                    kind: BusKindTag::Zip,
                    v_setpoint: None,
                    theta_deg: None,
                    p: None,
                    q: None,
                    shunt_g: nonzero(z.shunt_admittance.re),
                    shunt_b: nonzero(z.shunt_admittance.im),
                    i_load_re: nonzero(z.current.re),
                    i_load_im: nonzero(z.current.im),
                };
                match bus.kind {
                    BusKind::Slack { magnitude, angle } => {
                        if z.power != Complex64::new(0.0, 0.0) || z.current != Complex64::new(0.0, 0.0) {
                            errors.push(format!("bus {}: slack bus carries load", bus.id));
                        }
                        rec.kind = BusKindTag::Slack;
                        rec.v_setpoint = Some(magnitude);
                        rec.theta_deg = Some(degrees_for(angle));
                    }
                    BusKind::Pv { p, magnitude } => {
                        if z.power != Complex64::new(0.0, 0.0) {
                            errors.push(format!("bus {}: PV bus carries constant-power load", bus.id));
                        }
                        rec.kind = BusKindTag::Pv;
                        rec.v_setpoint = Some(magnitude);
                        rec.p = Some(p);
                    }
                    BusKind::Zip => {
                        rec.p = nonzero(z.power.re);
                        rec.q = nonzero(z.power.im);
                    }
                }
                rec
            })
            .collect();
        let branches = case
            .branches()
            .iter()
            .enumerate()
            .map(|(k, br)| {
                if br.shunt_admittance_total.re != 0.0 {
                    errors.push(format!("branch {k}: shunt conductance"));
                }
                BranchRecord {
                    from: br.from.0,
                    to: br.to.0,
                    series_g: br.series_admittance.re,
                    series_b: br.series_admittance.im,
                    shunt_b_total: nonzero(br.shunt_admittance_total.im),
                }
            })
            .collect();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        Ok(CaseFile { schema_version: SCHEMA_VERSION.to_string(), base_mva: case.base_mva(), buses, branches })
    }
}

/// Degree value whose `to_radians` reproduces `radians` exactly when one
/// exists within a few ulps of the direct conversion.
pub fn degrees_for(radians: f64) -> f64 {
    let direct = radians.to_degrees();
    let (mut up, mut down) = (direct, direct);
    for _ in 0..=16 {
        if up.to_radians() == radians {
            return up;
        }
        if down.to_radians() == radians {
            return down;
        }
        up = up.next_up();
        down = down.next_down();
    }
    direct
}

pub fn parse_case_str(text: &str) -> Result<NetworkCase> {
    let file: CaseFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    file.to_case()
}

pub fn parse_case_file(path: &Path) -> Result<NetworkCase> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse { line: 0, message: format!("cannot read {}: {e}", path.display()) })?;
    parse_case_str(&text)
}

pub fn emit_case(case: &NetworkCase) -> Result<String> {
    let file = CaseFile::from_case(case)?;
    toml::to_string(&file).map_err(|e| Error::InternalConsistency(format!("case serialization failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MINIMAL: &str = r#"
schema_version = "1"
base_mva = 100.0

[[buses]]
id = 1
kind = "zip"
p = -0.1
q = -0.05

[[buses]]
id = 2
kind = "slack"
v_setpoint = 1
theta_deg = 0.0

[[branches]]
from = 2
to = 1
series_g = 1.0
series_b = -5e0
"#;

    #[test]
    fn minimal_case() {
        let case = parse_case_str(MINIMAL).unwrap();
        assert_eq!(case.n(), 1);
        assert_eq!(case.scheduled_power()[0], Complex64::new(-0.1, -0.05));
        assert_eq!(case.branches()[0].series_admittance, Complex64::new(1.0, -5.0));
        assert_eq!(case.slack_voltage(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn degrees_become_radians() {
        let text = MINIMAL.replace("theta_deg = 0.0", "theta_deg = 30.0");
        let case = parse_case_str(&text).unwrap();
        assert!((case.slack_voltage().arg() - std::f64::consts::PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn two_slacks_are_reported() {
        let text = MINIMAL.replace("kind = \"zip\"\np = -0.1\nq = -0.05", "kind = \"slack\"\nv_setpoint = 1.0");
        match parse_case_str(&text).unwrap_err() {
            Error::Validation(v) => assert!(v.iter().any(|m| m.contains("exactly one slack")), "{v:?}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_field_has_line_number() {
        let text = MINIMAL.replace("q = -0.05", "q = -0.05\nreactance = 3.0");
        match parse_case_str(&text).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 10);
                assert!(message.contains("reactance"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        assert_eq!(parse_case_str("schema_version = ").unwrap_err().code(), "PARSE_ERROR");
        let text = MINIMAL.replace("kind = \"zip\"", "kind = \"pq\"");
        assert_eq!(parse_case_str(&text).unwrap_err().code(), "PARSE_ERROR");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL
            .replace("schema_version = \"1\"", "schema_version = \"2\"")
            .replace("p = -0.1", "p = -0.1\nv_setpoint = 1.0")
            .replace("to = 1", "to = 7");
        match parse_case_str(&text).unwrap_err() {
            Error::Validation(v) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v[0].contains("schema_version"));
                assert!(v[1].contains("v_setpoint"));
                assert!(v[2].contains("unknown bus"));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn field_restrictions_by_kind() {
        let text = MINIMAL.replace("theta_deg = 0.0", "theta_deg = 0.0\np = 1.0\ni_load_im = 0.1");
        match parse_case_str(&text).unwrap_err() {
            Error::Validation(v) => assert_eq!(v.len(), 2, "{v:?}"),
            e => panic!("{e:?}"),
        }
        let text = MINIMAL.replace("kind = \"zip\"\np = -0.1\nq = -0.05", "kind = \"pv\"\np = 0.2\nq = 0.1");
        assert_eq!(parse_case_str(&text).unwrap_err().code(), "VALIDATION_ERROR");
    }

    #[test]
    fn degree_search_finds_exact_preimage() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let rad = rng.random_range(-180.0f64..180.0).to_radians();
            assert_eq!(degrees_for(rad).to_radians(), rad);
        }
    }

    #[test]
    fn synthetic_cases_round_trip() {
        for seed in 0..5 {
            for case in [
                synth::radial_feeder(12, seed, &Default::default()),
                synth::lossless_network(9, seed, &Default::default()),
                synth::ten_bus_feeder(),
            ] {
                assert_eq!(parse_case_str(&emit_case(&case).unwrap()).unwrap(), case);
            }
        }
    }

    #[test]
    fn unrepresentable_data_is_refused() {
        let case = synth::ladder(Complex64::new(1.0, -2.0), ZipLoad::default());
        let lossy_shunt = NetworkCase::new(
            case.buses().to_vec(),
            vec![case.branches()[0].with_shunt(Complex64::new(0.01, 0.02))],
            100.0,
        )
        .unwrap();
        assert_eq!(emit_case(&lossy_shunt).unwrap_err().code(), "VALIDATION_ERROR");
    }

    fn random_case(seed: u64) -> NetworkCase {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..15usize);
        let mut buses = Vec::new();
        for i in 0..n {
            let zip = ZipLoad {
                shunt_admittance: Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
                current: Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
                power: Complex64::new(0.0, 0.0),
            };
            let bus = if rng.random_bool(0.3) {
                Bus::pv(BusId::from_index(i), rng.random_range(-1.0..1.0), rng.random_range(0.9..1.1)).with_zip(zip)
            } else {
                let s = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                Bus::zip(BusId::from_index(i), ZipLoad { power: s, ..zip })
            };
            buses.push(bus);
        }
        let angle = rng.random_range(-30.0f64..30.0).to_radians();
        buses.push(
            Bus::slack(BusId(n + 1), rng.random_range(0.9..1.1), angle)
                .with_zip(ZipLoad::default().with_shunt(Complex64::new(0.0, rng.random_range(0.0..0.1)))),
        );
        let mut branches = Vec::new();
        for i in 0..n {
            let parent = rng.random_range(i + 1..=n);
            let y = Complex64::new(rng.random_range(0.0..20.0), rng.random_range(-40.0..-1.0));
            branches.push(
                Branch::new(BusId::from_index(parent), BusId::from_index(i), y)
                    .with_shunt(Complex64::new(0.0, rng.random_range(0.0..0.1))),
            );
        }
        NetworkCase::new(buses, branches, rng.random_range(1.0..1000.0)).unwrap()
    }

    proptest! {
        #[test]
        fn emit_then_parse_is_identity(seed in any::<u64>()) {
            let case = random_case(seed);
            let text = emit_case(&case).unwrap();
            prop_assert_eq!(parse_case_str(&text).unwrap(), case);
            prop_assert_eq!(emit_case(&parse_case_str(&text).unwrap()).unwrap(), text);
        }
    }
}
