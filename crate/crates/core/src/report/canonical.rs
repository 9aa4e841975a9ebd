use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Decimal places used for every float in emitted JSON.
pub const FLOAT_DECIMALS: i32 = 6;

/// Rounds to the precision JSON output carries, so that a parsed report
/// compares equal to the one that was written.
pub fn round6(v: f64) -> f64 {
    let scale = 10f64.powi(FLOAT_DECIMALS);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Serializes `value` with sorted keys, two-space indentation and floats
/// fixed to six decimals. Equal values always produce equal bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| Error::MalformedReport(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_float(out: &mut String, v: f64) {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').trim_start_matches(|c| c == '0' || c == '.').is_empty() {
        out.push_str("0.000000");
    } else {
        out.push_str(&s);
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                write_float(out, n.as_f64().unwrap_or(0.0));
            } else {
                write!(out, "{n}").expect("writing to a String");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], level + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push('}');
        }
    }
}
