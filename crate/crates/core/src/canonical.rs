//! Canonical JSON: sorted object keys, two-space indentation, floats rounded
//! to 9 significant digits, trailing newline. Identical values always give
//! identical bytes, so artifacts diff cleanly between runs.

use serde::Serialize;
use serde_json::Value;

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("in-memory values serialize");
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    out
}

/// Rounds to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    let r = round_sig(x);
    let r = if r == 0.0 { 0.0 } else { r };
    // shortest round-trip form, same as serde_json
    serde_json::to_string(&r).expect("finite floats serialize")
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escapes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // scalar-only arrays stay on one line
            if items.iter().all(|i| !i.is_array() && !i.is_object()) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, depth, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(depth + 1, out);
                write_value(item, depth + 1, out);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
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
            for (k, key) in keys.iter().enumerate() {
                indent(depth + 1, out);
                out.push_str(&serde_json::to_string(key).expect("string escapes"));
                out.push_str(": ");
                write_value(&map[key.as_str()], depth + 1, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(depth, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let s = to_string(&json!({"b": 1, "a": [0.1 + 0.2, 1.0, 2.5e-12], "c": {"z": null, "y": "q\""}}));
        assert_eq!(
            s,
            "{\n  \"a\": [0.3, 1.0, 2.5e-12],\n  \"b\": 1,\n  \"c\": {\n    \"y\": \"q\\\"\",\n    \"z\": null\n  }\n}\n"
        );
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(0.123456789123), "0.123456789");
        assert_eq!(format_float(2.0 / 3.0), "0.666666667");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(f64::NAN), "null");
    }

    proptest! {
        #[test]
        fn reparse_round_trip_is_byte_identical(
            xs in proptest::collection::vec(-1e6f64..1e6, 0..8),
            names in proptest::collection::vec("[a-z]{1,6}", 0..5),
        ) {
            let v = json!({"xs": xs, "names": names, "nested": [{"x": xs.first().copied().unwrap_or(0.0)}]});
            let once = to_string(&v);
            let parsed: Value = serde_json::from_str(&once).unwrap();
            prop_assert_eq!(once, to_string(&parsed));
        }
    }
}
