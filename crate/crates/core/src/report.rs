//! Table, CSV and JSON rendering of run, check and compare reports.
//!
//! Numbers are rounded to 12 significant digits and printed in their
//! shortest round-trip form, so equal reports render to equal bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::pipeline::{CaseDiagnosis, CompareReport, NamedCheck, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_HEADER: &str = "bus,v_nom_re,v_nom_im,dv_re,dv_im,vmag,theta_deg,p_hot,q_hot";
pub const CSV_ORACLE_COLUMNS: &str = "v_oracle_re,v_oracle_im,abs_err";
pub const COMPARE_CSV_HEADER: &str = "alpha,method,err_norm,err_over_alpha2,s_hot_norm,oracle_iterations,oracle_converged";

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest text that parses back to `round_sig(x)`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else if !r.is_finite() || (1e-5..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn num(x: f64) -> Value {
    Value::from(round_sig(x))
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn csv_text(header: &str, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn run_csv(report: &RunReport) -> String {
    let with_oracle = report.rows.iter().any(|r| r.oracle.is_some());
    let header = if with_oracle { format!("{CSV_HEADER},{CSV_ORACLE_COLUMNS}") } else { CSV_HEADER.to_string() };
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut fields = vec![r.bus.to_string()];
            fields.extend(
                [r.v_nom.re, r.v_nom.im, r.dv.re, r.dv.im, r.vmag, r.theta_deg, r.p_hot, r.q_hot].map(fmt_num),
            );
            if with_oracle {
                let o = r.oracle.as_ref().expect("oracle columns present on every row");
                fields.extend([o.voltage.re, o.voltage.im, o.abs_err].map(fmt_num));
            }
            fields
        })
        .collect();
    csv_text(&header, rows)
}

fn checks_json(checks: &[NamedCheck]) -> Value {
    Value::Array(
        checks
            .iter()
            .map(|c| json!({ "name": c.name, "status": c.status.name(), "detail": c.detail }))
            .collect(),
    )
}

fn named_values(values: &[(String, f64)]) -> Value {
    Value::Array(values.iter().map(|(n, v)| json!({ "name": n, "value": num(*v) })).collect())
}

fn run_json(report: &RunReport) -> Value {
    let s = &report.summary;
    let buses: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("bus".into(), Value::from(r.bus));
            for (k, v) in [
                ("v_nom_re", r.v_nom.re),
                ("v_nom_im", r.v_nom.im),
                ("dv_re", r.dv.re),
                ("dv_im", r.dv.im),
                ("vmag", r.vmag),
                ("theta_deg", r.theta_deg),
                ("p_hot", r.p_hot),
                ("q_hot", r.q_hot),
            ] {
                m.insert(k.into(), num(v));
            }
            if let Some(o) = &r.oracle {
                m.insert("v_oracle_re".into(), num(o.voltage.re));
                m.insert("v_oracle_im".into(), num(o.voltage.im));
                m.insert("abs_err".into(), num(o.abs_err));
            }
            Value::Object(m)
        })
        .collect();
    let bounds: Vec<Value> = report
        .bounds
        .iter()
        .map(|b| json!({ "name": b.name, "value": num(b.value), "bound": num(b.bound), "satisfied": b.satisfied }))
        .collect();
    let oracle = s.oracle.as_ref().map_or(Value::Null, |o| {
        json!({
            "converged": o.converged,
            "iterations": o.iterations,
            "final_mismatch": num(o.final_mismatch),
            "max_abs_err": num(o.max_abs_err),
            "err_norm": num(o.err_norm),
        })
    });
    json!({
        "method_requested": s.method_requested.name(),
        "method_resolved": s.method_resolved.name(),
        "solution_method": s.solution_method.map_or(Value::Null, |m| Value::from(m.name())),
        "n": s.n,
        "buses": buses,
        "summary": {
            "s_hot_norm": num(s.s_hot_norm),
            "p_hot_norm": num(s.p_hot_norm),
            "q_hot_norm": num(s.q_hot_norm),
            "max_mismatch": num(s.max_mismatch),
            "condition_estimate": opt_num(s.condition_estimate),
            "pivot_ratio": opt_num(s.pivot_ratio),
            "conditions_overridden": s.conditions_overridden,
            "metrics": named_values(&s.metrics),
        },
        "checks": checks_json(&report.checks),
        "bounds": bounds,
        "oracle": oracle,
        "timings": report.timings.as_ref().map_or(Value::Null, |t| named_values(t)),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn checks_table(out: &mut String, checks: &[NamedCheck]) {
    out.push_str("checks:\n");
    for c in checks {
        let _ = writeln!(out, "  [{:>4}] {:<22} {}", c.status.name(), c.name, c.detail);
    }
}

fn run_table(report: &RunReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(out, "method: {} (requested {})", s.method_resolved, s.method_requested);
    if let Some(m) = s.solution_method {
        let _ = writeln!(out, "solver: {}", m.name());
    }
    let _ = writeln!(out, "buses: {}", s.n);
    out.push('\n');
    let with_oracle = report.rows.iter().any(|r| r.oracle.is_some());
    let mut header: Vec<&str> = CSV_HEADER.split(',').collect();
    if with_oracle {
        header.extend(CSV_ORACLE_COLUMNS.split(','));
    }
    let mut line = format!("{:>5}", header[0]);
    for h in &header[1..] {
        let _ = write!(line, " {h:>19}");
    }
    let _ = writeln!(out, "{line}");
    for r in &report.rows {
        let mut line = format!("{:>5}", r.bus);
        let mut vals = vec![r.v_nom.re, r.v_nom.im, r.dv.re, r.dv.im, r.vmag, r.theta_deg, r.p_hot, r.q_hot];
        if let Some(o) = &r.oracle {
            vals.extend([o.voltage.re, o.voltage.im, o.abs_err]);
        }
        for v in vals {
            let _ = write!(line, " {:>19}", fmt_num(v));
        }
        let _ = writeln!(out, "{line}");
    }
    out.push('\n');
    checks_table(&mut out, &report.checks);
    out.push_str("bounds:\n");
    for b in &report.bounds {
        let mark = if b.satisfied { "ok" } else { "VIOLATED" };
        let _ = writeln!(out, "  [{mark}] {}: {} <= {}", b.name, fmt_num(b.value), fmt_num(b.bound));
    }
    out.push_str("summary:\n");
    let mut kv = vec![
        ("s_hot_norm".to_string(), fmt_num(s.s_hot_norm)),
        ("p_hot_norm".to_string(), fmt_num(s.p_hot_norm)),
        ("q_hot_norm".to_string(), fmt_num(s.q_hot_norm)),
        ("max_mismatch".to_string(), fmt_num(s.max_mismatch)),
    ];
    if let Some(c) = s.condition_estimate {
        kv.push(("condition_estimate".to_string(), fmt_num(c)));
    }
    if let Some(p) = s.pivot_ratio {
        kv.push(("pivot_ratio".to_string(), fmt_num(p)));
    }
    if s.conditions_overridden {
        kv.push(("conditions_overridden".to_string(), "true".to_string()));
    }
    kv.extend(s.metrics.iter().map(|(n, v)| (n.clone(), fmt_num(*v))));
    if let Some(o) = &s.oracle {
        kv.push(("oracle_converged".to_string(), o.converged.to_string()));
        kv.push(("oracle_iterations".to_string(), o.iterations.to_string()));
        kv.push(("oracle_err_norm".to_string(), fmt_num(o.err_norm)));
        kv.push(("oracle_max_abs_err".to_string(), fmt_num(o.max_abs_err)));
    }
    for (k, v) in kv {
        let _ = writeln!(out, "  {k:<24} {v}");
    }
    if let Some(t) = &report.timings {
        out.push_str("timings (s):\n");
        for (k, v) in t {
            let _ = writeln!(out, "  {k:<24} {}", fmt_num(*v));
        }
    }
    out
}

pub fn emit_report(report: &RunReport, format: Format) -> String {
    match format {
        Format::Table => run_table(report),
        Format::Csv => run_csv(report),
        Format::Json => pretty(&run_json(report)),
    }
}

pub fn emit_check(diag: &CaseDiagnosis, format: Format) -> String {
    match format {
        Format::Table => {
            let mut out = String::new();
            checks_table(&mut out, &diag.checks);
            out
        }
        Format::Csv => csv_text(
            "name,status,detail",
            diag.checks.iter().map(|c| vec![c.name.clone(), c.status.name().to_string(), c.detail.clone()]).collect(),
        ),
        Format::Json => pretty(&json!({
            "checks": checks_json(&diag.checks),
            "lemma1": {
                "verdict": diag.lemma1.verdict,
                "reasons": diag.lemma1.reasons.iter().map(|r| r.code()).collect::<Vec<_>>(),
                "slack_adjacent": diag.lemma1.slack_adjacent.iter().map(|b| b.0).collect::<Vec<_>>(),
            },
            "theorem1": diag.theorem1.as_ref().map_or(Value::Null, |t| json!({
                "overall": t.overall,
                "violated_buses": t.violated_buses().iter().map(|b| b.0).collect::<Vec<_>>(),
                "strict_at_slack_adjacent": t.strict_at_slack_adjacent,
                "irreducible": t.irreducible,
            })),
            "max_conductance": num(diag.max_conductance),
        })),
    }
}

fn compare_fields(r: &crate::pipeline::CompareRow) -> Vec<String> {
    vec![
        fmt_num(r.alpha),
        r.method.name().to_string(),
        fmt_num(r.err_norm),
        fmt_num(r.err_over_alpha2),
        fmt_num(r.s_hot_norm),
        r.oracle_iterations.to_string(),
        r.oracle_converged.to_string(),
    ]
}

pub fn emit_compare(report: &CompareReport, format: Format) -> String {
    match format {
        Format::Csv => csv_text(COMPARE_CSV_HEADER, report.rows.iter().map(compare_fields).collect()),
        Format::Table => {
            let mut out = format!("compare (requested {})\n", report.method_requested);
            let header: Vec<&str> = COMPARE_CSV_HEADER.split(',').collect();
            let _ = writeln!(out, "{}", header.iter().map(|h| format!("{h:>19}")).collect::<Vec<_>>().join(" "));
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{}",
                    compare_fields(r).iter().map(|f| format!("{f:>19}")).collect::<Vec<_>>().join(" ")
                );
            }
            out
        }
        Format::Json => pretty(&json!({
            "method_requested": report.method_requested.name(),
            "rows": report.rows.iter().map(|r| json!({
                "alpha": num(r.alpha),
                "method": r.method.name(),
                "err_norm": num(r.err_norm),
                "err_over_alpha2": num(r.err_over_alpha2),
                "s_hot_norm": num(r.s_hot_norm),
                "oracle_iterations": r.oracle_iterations,
                "oracle_converged": r.oracle_converged,
            })).collect::<Vec<_>>(),
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{compare_sweep, run_check, run_pipeline, PipelineOptions};
    use crate::synth;
    use proptest::prelude::*;

    fn report(with_oracle: bool) -> RunReport {
        run_pipeline(&synth::ten_bus_feeder(), &PipelineOptions { with_oracle, ..Default::default() }).unwrap()
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-2.0e-20), "-2e-20");
        assert_eq!(fmt_num(123456789012345.0), "123456789012000");
        assert_eq!(fmt_num(6.02214076e23), "6.02214076e23");
    }

    #[test]
    fn csv_header_exact() {
        let plain = emit_report(&report(false), Format::Csv);
        assert_eq!(plain.lines().next().unwrap(), "bus,v_nom_re,v_nom_im,dv_re,dv_im,vmag,theta_deg,p_hot,q_hot");
        let full = emit_report(&report(true), Format::Csv);
        assert_eq!(
            full.lines().next().unwrap(),
            "bus,v_nom_re,v_nom_im,dv_re,dv_im,vmag,theta_deg,p_hot,q_hot,v_oracle_re,v_oracle_im,abs_err"
        );
        assert_eq!(full.lines().count(), 11);
    }

    #[test]
    fn repeated_emission_is_byte_identical() {
        for format in [Format::Table, Format::Csv, Format::Json] {
            assert_eq!(emit_report(&report(true), format), emit_report(&report(true), format));
        }
    }

    #[test]
    fn json_round_trips_numbers() {
        let r = report(true);
        let v: Value = serde_json::from_str(&emit_report(&r, Format::Json)).unwrap();
        let buses = v["buses"].as_array().unwrap();
        for (row, b) in r.rows.iter().zip(buses) {
            assert_eq!(b["dv_re"].as_f64().unwrap(), round_sig(row.dv.re));
            assert_eq!(b["theta_deg"].as_f64().unwrap(), round_sig(row.theta_deg));
            assert_eq!(b["abs_err"].as_f64().unwrap(), round_sig(row.oracle.as_ref().unwrap().abs_err));
        }
        assert_eq!(v["summary"]["s_hot_norm"].as_f64().unwrap(), round_sig(r.summary.s_hot_norm));
        assert_eq!(v["method_resolved"], "noload");
    }

    #[test]
    fn csv_values_match_json_values() {
        let r = report(false);
        let csv = emit_report(&r, Format::Csv);
        let v: Value = serde_json::from_str(&emit_report(&r, Format::Json)).unwrap();
        for (line, b) in csv.lines().skip(1).zip(v["buses"].as_array().unwrap()) {
            let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields[3], b["dv_re"].as_f64().unwrap());
            assert_eq!(fields[8], b["q_hot"].as_f64().unwrap());
        }
    }

    #[test]
    fn check_csv_quotes_details() {
        let diag = run_check(&synth::lossless_network(6, 1, &Default::default()));
        let text = emit_check(&diag, Format::Csv);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), diag.checks.len());
        assert!(rows.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn compare_csv_header_exact() {
        let rep = compare_sweep(&synth::ten_bus_feeder(), &[1.0, 0.5], &PipelineOptions::default()).unwrap();
        let text = emit_compare(&rep, Format::Csv);
        assert_eq!(text.lines().next().unwrap(), COMPARE_CSV_HEADER);
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn formatted_numbers_parse_back_to_rounded_value(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let parsed: f64 = fmt_num(x).parse().unwrap();
            prop_assert_eq!(parsed, round_sig(x));
        }
    }
}
