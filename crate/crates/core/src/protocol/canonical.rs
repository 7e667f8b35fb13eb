//! Canonical JSON: sorted keys, no insignificant whitespace, and integral
//! numbers written without a fractional part.

use serde::Serialize;
use serde_json::{Number, Value};

pub fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push(':');
                write_canonical(v, out);
            }
            out.push('}');
        }
    }
}

const MAX_SAFE_INTEGER: f64 = 9_007_199_254_740_992.0;

fn write_number(n: &Number, out: &mut String) {
    if n.is_f64() {
        let f = n.as_f64().expect("is_f64");
        if f.fract() == 0.0 && f.abs() < MAX_SAFE_INTEGER {
            out.push_str(&(f as i64).to_string());
            return;
        }
    }
    out.push_str(&n.to_string());
}

pub fn to_canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

/// Canonical JSON of any serializable value.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> String {
    to_canonical_string(&serde_json::to_value(value).expect("wire types serialize to JSON"))
}

/// Canonical JSON followed by a newline, for JSON-lines files.
pub fn to_canonical_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = to_canonical(value);
    s.push('\n');
    s
}
