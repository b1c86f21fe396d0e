//! Run reports and their JSON / CSV emission.
//!
//! Floats are written with 17 significant digits; non-finite values become
//! `null` in JSON and an empty field in CSV.

use std::fmt::Write as _;

use serde_json::{Map, Value};

/// One asserted (or informational) invariant with its worst value over the run.
#[derive(Clone, Debug)]
pub struct Invariant {
    pub name: String,
    pub tolerance: f64,
    pub max: f64,
    pub p95: f64,
    pub count: usize,
    /// Informational entries are reported but never fail the run.
    pub gating: bool,
}

impl Invariant {
    pub fn pass(&self) -> bool {
        self.max.is_finite() && self.max <= self.tolerance || self.count == 0
    }
}

/// Accumulates samples of named residuals in first-seen order.
#[derive(Default)]
pub struct Tally {
    entries: Vec<(String, f64, bool, Vec<f64>)>,
}

impl Tally {
    pub fn push(&mut self, name: &str, tolerance: f64, value: f64) {
        self.push_with(name, tolerance, value, true);
    }

    pub fn info(&mut self, name: &str, tolerance: f64, value: f64) {
        self.push_with(name, tolerance, value, false);
    }

    fn push_with(&mut self, name: &str, tolerance: f64, value: f64, gating: bool) {
        match self.entries.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.3.push(value),
            None => self.entries.push((name.to_string(), tolerance, gating, vec![value])),
        }
    }

    pub fn finish(self) -> Vec<Invariant> {
        self.entries
            .into_iter()
            .map(|(name, tolerance, gating, mut v)| {
                let count = v.len();
                // NaN sorts last and so dominates the max
                v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(if a.is_nan() { std::cmp::Ordering::Greater } else { std::cmp::Ordering::Less }));
                let max = if v.iter().any(|x| x.is_nan()) { f64::NAN } else { v.last().copied().unwrap_or(0.0) };
                let p95 = v.get(((count as f64 * 0.95).ceil() as usize).saturating_sub(1)).copied().unwrap_or(0.0);
                Invariant {
                    name,
                    tolerance,
                    max,
                    p95,
                    count,
                    gating,
                }
            })
            .collect()
    }
}

pub struct RunReport {
    pub operation: String,
    pub config: Value,
    pub geometry: Value,
    pub records: Vec<Value>,
    pub invariants: Vec<Invariant>,
    /// Per-point runtime failures: `{index, point, error}`.
    pub errors: Vec<Value>,
    /// Extra tables (e.g. congruence states); emitted as CSV alongside records.
    pub tables: Vec<(String, Vec<Value>)>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| !i.gating || i.pass())
    }

    pub fn exit_code(&self) -> u8 {
        if !self.errors.is_empty() {
            3
        } else if !self.passed() {
            1
        } else {
            0
        }
    }

    pub fn to_value(&self) -> Value {
        let inv: Vec<Value> = self
            .invariants
            .iter()
            .map(|i| {
                let mut m = Map::new();
                m.insert("name".into(), Value::from(i.name.clone()));
                m.insert("tolerance".into(), num(i.tolerance));
                m.insert("max".into(), num(i.max));
                m.insert("p95".into(), num(i.p95));
                m.insert("count".into(), Value::from(i.count));
                m.insert("gating".into(), Value::from(i.gating));
                m.insert("pass".into(), Value::from(i.pass()));
                Value::Object(m)
            })
            .collect();
        let mut m = Map::new();
        m.insert("operation".into(), Value::from(self.operation.clone()));
        m.insert("config".into(), self.config.clone());
        m.insert("geometry".into(), self.geometry.clone());
        m.insert("records".into(), Value::Array(self.records.clone()));
        for (name, rows) in &self.tables {
            m.insert(name.clone(), Value::Array(rows.clone()));
        }
        m.insert("invariants".into(), Value::Array(inv));
        m.insert("errors".into(), Value::Array(self.errors.clone()));
        let verdict = match self.exit_code() {
            0 => "pass",
            1 => "fail",
            _ => "error",
        };
        m.insert("verdict".into(), Value::from(verdict));
        let mut timing = Map::new();
        timing.insert("wall_seconds".into(), num(self.wall_seconds));
        m.insert("timing".into(), Value::Object(timing));
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = String::new();
        write_json(&mut s, &self.to_value(), 0);
        s.push('\n');
        s
    }

    /// Records (and any extra tables) as CSV, one section per table.
    pub fn to_csv(&self) -> String {
        let mut out = csv_table(&self.records);
        for (name, rows) in &self.tables {
            out.push_str(&format!("\n# {name}\n"));
            out.push_str(&csv_table(rows));
        }
        out
    }

    /// One line per invariant for the terminal.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for i in &self.invariants {
            let tag = match (i.gating, i.pass()) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            let _ = writeln!(s, "[{tag}] {}: max {:.3e} p95 {:.3e} tol {:.1e} (n = {})", i.name, i.max, i.p95, i.tolerance, i.count);
        }
        for e in &self.errors {
            let _ = writeln!(s, "[ERROR] {e}");
        }
        s
    }
}

/// JSON number or null for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat_n(' ', 2 * k));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => out.push_str(&u.to_string()),
            (_, Some(i), _) if !n.is_f64() => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&fmt_f64(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_json(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 1);
                write_json(out, x, indent + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(out, x, indent + 1);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Flatten a record to `(column, cell)` pairs: nested keys joined by `.`, array
/// entries suffixed with their index.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}_{i}"), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Number(n) if n.is_f64() => out.push((prefix.to_string(), fmt_f64(n.as_f64().unwrap_or(f64::NAN)))),
        Value::Number(n) => out.push((prefix.to_string(), n.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
    }
}

fn csv_table(rows: &[Value]) -> String {
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut f = Vec::new();
            flatten("", r, &mut f);
            f
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for r in &flat {
        for (k, _) in r {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory csv");
    for r in &flat {
        let row: Vec<&str> = header
            .iter()
            .map(|h| r.iter().find(|(k, _)| k == h).map_or("", |(_, c)| c.as_str()))
            .collect();
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 cells")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        let mut s = String::new();
        write_json(&mut s, &json!({"a": 0.1, "b": 3, "c": [1.5, null]}), 0);
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"b\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert!(back["c"][1].is_null());
        assert!(num(f64::NAN).is_null());
    }

    #[test]
    fn tally_statistics() {
        let mut t = Tally::default();
        for i in 1..=100 {
            t.push("r", 50.0, i as f64);
        }
        t.info("law", 0.0, 1.0);
        let inv = t.finish();
        assert_eq!(inv[0].max, 100.0);
        assert_eq!(inv[0].p95, 95.0);
        assert!(!inv[0].pass() && inv[0].gating);
        assert!(!inv[1].gating);
        let mut t = Tally::default();
        t.push("r", 1.0, f64::NAN);
        assert!(!t.finish()[0].pass());
    }

    #[test]
    fn csv_flattens_records() {
        let s = csv_table(&[json!({"i": 0, "u": [0.5, 0.25], "ok": true}), json!({"i": 1, "u": [1.0, 2.0], "ok": false})]);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("i,u_0,u_1,ok"));
        assert_eq!(lines.next(), Some("0,5.0000000000000000e-1,2.5000000000000000e-1,true"));
    }
}
