//! Canonical text encoding used for task files, manifests and traces.
//!
//! The encoding is JSON with object keys in byte order, two-space indentation
//! for objects and for arrays holding containers, scalar arrays kept on one
//! line, and every non-integral number written as the shortest decimal that
//! round-trips the value after rounding to 9 significant digits. Writing a
//! parsed canonical document again reproduces it byte for byte.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::ParseError;

/// Round to 9 significant decimal digits.
pub fn q9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Round to a fixed number of decimal places (used for quantized timelines).
pub fn round_to(x: f64, decimals: u32) -> f64 {
    let s = format!("{x:.*}", decimals as usize);
    let v: f64 = s.parse().unwrap_or(x);
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn write_number(out: &mut String, n: &serde_json::Number) -> Result<(), String> {
    if let Some(u) = n.as_u64() {
        write!(out, "{u}").unwrap();
    } else if let Some(i) = n.as_i64() {
        write!(out, "{i}").unwrap();
    } else {
        let f = n.as_f64().ok_or("unrepresentable number")?;
        if !f.is_finite() {
            return Err(format!("non-finite number {f}"));
        }
        let v = q9(f);
        if v == 0.0 {
            out.push('0');
        } else {
            write!(out, "{v}").unwrap();
        }
    }
    Ok(())
}

fn is_container(v: &Value) -> bool {
    matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(out: &mut String, v: &Value, indent: usize) -> Result<(), String> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n)?,
        Value::String(s) => out.push_str(&serde_json::to_string(s).map_err(|e| e.to_string())?),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().any(is_container) {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    push_indent(out, indent + 1);
                    write_value(out, item, indent + 1)?;
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                push_indent(out, indent);
                out.push(']');
            } else {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, item, indent)?;
                }
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                push_indent(out, indent + 1);
                out.push_str(&serde_json::to_string(k).map_err(|e| e.to_string())?);
                out.push_str(": ");
                write_value(out, &map[*k], indent + 1)?;
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            push_indent(out, indent);
            out.push('}');
        }
    }
    Ok(())
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Write a JSON value canonically, with a trailing newline.
pub fn write_canonical(value: &Value) -> Result<String, String> {
    let mut out = String::new();
    write_value(&mut out, value, 0)?;
    out.push('\n');
    Ok(out)
}

/// Serialize any value to canonical text.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String, String> {
    let v = serde_json::to_value(value).map_err(|e| e.to_string())?;
    write_canonical(&v)
}

/// Byte offset of a 1-based (line, column) position reported by serde_json.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

/// Parse canonical (or any JSON) text into `T`, reporting failures with a
/// byte offset.
pub fn from_canonical<T: DeserializeOwned>(text: &str) -> Result<T, ParseError> {
    serde_json::from_str(text)
        .map_err(|e| ParseError { offset: byte_offset(text, e.line(), e.column()), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn q9_rounds_to_nine_significant_digits() {
        assert_eq!(q9(1.234567891234), 1.23456789);
        assert_eq!(q9(-0.000123456789123), -0.000123456789);
        assert_eq!(q9(0.1 + 0.2), 0.3);
        assert_eq!(q9(-0.0), 0.0);
    }

    #[test]
    fn keys_are_sorted_and_numbers_fixed() {
        let v = json!({"b": 1.5, "a": [1, 2.25, 3], "c": {"z": true, "y": null}});
        let s = write_canonical(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [1, 2.25, 3],\n  \"b\": 1.5,\n  \"c\": {\n    \"y\": null,\n    \"z\": true\n  }\n}\n"
        );
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let v = json!({"x": [0.1, 1e-7, 123456789.123, -2.0], "n": [[1, 2], [3]], "s": "é\"q"});
        let a = write_canonical(&v).unwrap();
        let back: Value = serde_json::from_str(&a).unwrap();
        let b = write_canonical(&back).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("0.0000001"));
    }

    #[test]
    fn parse_error_carries_byte_offset() {
        let text = "{\n  \"a\": 1,\n  \"b\": ?\n}";
        let err = from_canonical::<Value>(text).unwrap_err();
        assert_eq!(&text[err.offset..err.offset + 1], "?");
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        let v = serde_json::to_value(f64::NAN).unwrap();
        // serde_json maps NaN to null, so route through a Number check directly.
        assert_eq!(v, Value::Null);
        assert!(write_number(&mut String::new(), &serde_json::Number::from_f64(1.0).unwrap()).is_ok());
    }
}
