//! JSON and CSV renderings of engine results.
//!
//! Floating values are rounded to 12 significant digits before serialization,
//! so equal inputs always produce identical bytes. Non-finite values become
//! `null` in JSON and empty cells in CSV.

use serde_json::{json, Map, Value};

use crate::canonical::{CanonicalForm, EquivalenceVerdict, FittedMap};
use crate::invariants::{InvariantBundle, InvariantValues, OrbitClass};
use crate::ode::{CubicOde, Domain};
use crate::suite::SuiteResult;
use crate::expr::Poly;
use crate::{Expr, Point2};

pub const SCHEMA_VERSION: u32 = 1;

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(round12(v)).map_or(Value::Null, Value::Number)
}

fn pair(p: Point2) -> Value {
    json!([num(p.x), num(p.y)])
}

fn field(v: [f64; 2]) -> Value {
    json!([num(v[0]), num(v[1])])
}

/// Text of a number in a CSV cell.
pub fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{}", round12(v))
    } else {
        String::new()
    }
}

/// A report object with the schema version as its first field.
pub fn document(kind: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schemaVersion".into(), json!(SCHEMA_VERSION));
    m.insert("report".into(), json!(kind));
    m
}

pub fn to_pretty(m: Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn ode_json(e: &CubicOde) -> Value {
    json!({
        "a0": e.coeff(0).to_string(),
        "a1": e.coeff(1).to_string(),
        "a2": e.coeff(2).to_string(),
        "a3": e.coeff(3).to_string(),
    })
}

pub fn domain_json(d: Domain) -> Value {
    json!([num(d.x0), num(d.x1), num(d.y0), num(d.y1)])
}

pub fn orbit_json(c: OrbitClass) -> Value {
    json!({
        "level": c.level.name(),
        "pointwise": c.pointwise,
        "caveat": if c.pointwise {
            Value::from("pointwise zero test |v| <= 1e-10 at a single point")
        } else {
            Value::Null
        },
    })
}

/// Printed form, expanded when `e` is a polynomial.
pub fn expr_text(e: &Expr) -> String {
    if e.is_polynomial() {
        if let Some(p) = Poly::from_expr(e) {
            return p.to_expr().to_string();
        }
    }
    e.to_string()
}

pub fn bundle_json(b: &InvariantBundle) -> Value {
    let vf = |f: &[Expr; 2]| json!([f[0].to_string(), f[1].to_string()]);
    json!({
        "L1": expr_text(&b.l1),
        "L2": expr_text(&b.l2),
        "L3": expr_text(&b.l3),
        "Psi1": expr_text(&b.psi1),
        "Psi2": expr_text(&b.psi2),
        "xi1": vf(&b.xi1),
        "xi2": vf(&b.xi2),
        "nu": b.nu_density.to_string(),
        "I1": b.i1.to_string(),
        "I2": b.i2.to_string(),
    })
}

pub fn values_json(p: Point2, v: &InvariantValues) -> Value {
    json!({
        "point": pair(p),
        "L1": num(v.l1),
        "L2": num(v.l2),
        "L3": num(v.l3),
        "Psi1": num(v.psi1),
        "Psi2": num(v.psi2),
        "xi1": field(v.xi1),
        "xi2": field(v.xi2),
        "nu": num(v.nu_density),
        "I1": num(v.i1),
        "I2": num(v.i2),
    })
}

pub fn fitted_map_json(f: &FittedMap) -> Value {
    json!({
        "monomials": f.monomials.iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>(),
        "fx": f.fx.iter().map(|&c| num(c)).collect::<Vec<_>>(),
        "fy": f.fy.iter().map(|&c| num(c)).collect::<Vec<_>>(),
        "rms": num(f.rms),
    })
}

pub fn verdict_json(v: &EquivalenceVerdict, tol: f64, n: usize) -> Map<String, Value> {
    let mut m = document("equiv");
    m.insert("status".into(), json!(v.status.name()));
    m.insert("maxDeviation".into(), num(v.max_deviation));
    m.insert("coverage".into(), num(v.coverage));
    m.insert("tolerance".into(), num(tol));
    m.insert("grid".into(), json!(n));
    m.insert(
        "mapSamples".into(),
        v.map_samples
            .iter()
            .map(|s| json!({"p": pair(s.source), "q": pair(s.target), "deviation": num(s.deviation)}))
            .collect(),
    );
    if let Some(f) = &v.fitted_map {
        m.insert("fittedMap".into(), fitted_map_json(f));
    }
    m.insert("reasons".into(), json!(v.reasons));
    m
}

pub const CSV_HEADER: &str = "x,y,xt,yt,jac,mask,J0,J1,J2,J3";

/// One row per lattice node in lattice order.
pub fn canonical_csv(c: &CanonicalForm) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in &c.nodes {
        let j = s.coeffs.unwrap_or([f64::NAN; 4]);
        let row = [
            cell(s.point.x),
            cell(s.point.y),
            cell(s.g[0]),
            cell(s.g[1]),
            cell(s.jacobian),
            u8::from(s.mask).to_string(),
            cell(j[0]),
            cell(j[1]),
            cell(j[2]),
            cell(j[3]),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn canonical_json(c: &CanonicalForm) -> Map<String, Value> {
    let mut m = document("canonical");
    m.insert("domain".into(), domain_json(c.domain));
    m.insert("grid".into(), json!(c.n));
    m.insert("masked".into(), json!(c.masked_count()));
    m.insert(
        "nodes".into(),
        c.nodes
            .iter()
            .map(|s| {
                json!({
                    "p": pair(s.point),
                    "g": field(s.g),
                    "jac": num(s.jacobian),
                    "mask": s.mask,
                    "J": s.coeffs.map_or(Value::Null, |j| j.iter().map(|&v| num(v)).collect()),
                })
            })
            .collect(),
    );
    m
}

pub fn suites_json(seed: u64, results: &[SuiteResult]) -> Map<String, Value> {
    let mut m = document("selftest");
    m.insert("seed".into(), json!(seed));
    m.insert("passed".into(), json!(results.iter().all(|r| r.passed)));
    m.insert(
        "suites".into(),
        results
            .iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "passed": r.passed,
                    "cases": r.cases,
                    "worst": num(r.worst),
                    "threshold": num(r.threshold),
                    "notes": r.notes,
                })
            })
            .collect(),
    );
    m
}

/// Plain-text pass/fail table.
pub fn suites_table(seed: u64, results: &[SuiteResult]) -> String {
    let mut out = format!("selftest seed {seed}\n");
    out.push_str(&format!("{:<24} {:>6} {:>6} {:>20} {:>20}\n", "suite", "result", "cases", "worst", "threshold"));
    for r in results {
        out.push_str(&format!(
            "{:<24} {:>6} {:>6} {:>20} {:>20}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.cases,
            format!("{:.11e}", r.worst),
            format!("{:.11e}", r.threshold),
        ));
        for note in &r.notes {
            out.push_str(&format!("    note: {note}\n"));
        }
    }
    let all = results.iter().all(|r| r.passed);
    out.push_str(if all { "all suites passed\n" } else { "some suites FAILED\n" });
    out
}
