use std::fmt::Write as _;

use dsym_core::detsolve::SequenceTable;
use dsym_core::expr::Expr;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Number, Value};

pub const SCHEMA: &str = "dsym/1";

/// Serialize, then rewrite every non-integer number with 17 significant digits.
pub fn to_json<T: Serialize>(v: &T) -> Value {
    canonical(serde_json::to_value(v).expect("report types serialize"))
}

pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            if text.contains(['.', 'e', 'E']) {
                let f: f64 = text.parse().expect("JSON number parses as f64");
                Value::Number(float(f))
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

fn float(f: f64) -> Number {
    format!("{f:.16e}").parse().expect("formatted float is a JSON number")
}

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn expr_or_null(e: Option<&Expr>) -> Value {
    e.map_or(Value::Null, |e| Value::String(e.to_string()))
}

/// One entry per coefficient: label, closed form if recognised, tabulated values.
pub fn coefficients(labels: &[String], table: &SequenceTable, closed: &[Option<Expr>]) -> Value {
    let items: Vec<Value> = table
        .names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            json!({
                "name": name,
                "label": labels.get(k),
                "closed_form": expr_or_null(closed[k].as_ref()),
                "values": table.column(k).into_iter().map(complex).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "start": table.start, "items": items })
}

pub fn envelope(command: &str, config: Value, result: Value, passed: bool) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), SCHEMA.into());
    m.insert("command".into(), command.into());
    m.insert("config".into(), config);
    m.insert("passed".into(), passed.into());
    m.insert("result".into(), result);
    canonical(Value::Object(m))
}

pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

pub fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Closed forms of a coefficient table, one indented line each; zero columns skipped.
pub fn coefficient_lines(
    out: &mut String,
    labels: &[String],
    table: &SequenceTable,
    closed: &[Option<Expr>],
) {
    for (k, name) in table.names.iter().enumerate() {
        if table.is_zero_column(k) {
            continue;
        }
        let label = labels.get(k).map_or(String::new(), |l| format!(" [{l}]"));
        match &closed[k] {
            Some(e) => writeln!(out, "    {name}(n){label} = {e}").unwrap(),
            None => writeln!(out, "    {name}(n){label}: tabulated, no closed form recognised").unwrap(),
        }
    }
}

pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{} - {}i", z.re, -z.im)
    } else {
        format!("{} + {}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_get_seventeen_digits() {
        let v = canonical(json!({"a": 0.1, "b": 3, "c": [1e-9, -2.5]}));
        assert_eq!(
            v.to_string(),
            r#"{"a":1.0000000000000001e-1,"b":3,"c":[1.0000000000000001e-9,-2.5000000000000000e+0]}"#
        );
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_json(&f64::NAN), Value::Null);
    }
}
