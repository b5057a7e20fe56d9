//! Structural comparison of two report files.
//!
//! Reports are compared as JSON trees so the diff works across versions of
//! the typed schema and treats non-finite floats (serialized as null) without
//! special cases. The top-level `timings` object is excluded: it is the one
//! intentionally nondeterministic section.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffEntry {
    pub path: String,
    pub left: String,
    pub right: String,
}

/// Collects every field where the two documents disagree. Numbers pass when
/// |a - b| <= tol * max(1, |a|, |b|); everything else must match exactly.
pub fn diff_values(left: &Value, right: &Value, tol: f64) -> Vec<DiffEntry> {
    let mut out = Vec::new();
    walk(left, right, tol, "$", &mut out);
    out
}

fn describe(v: Option<&Value>) -> String {
    match v {
        None => "<absent>".into(),
        Some(Value::Object(_)) => "<object>".into(),
        Some(Value::Array(a)) => format!("<array of {}>", a.len()),
        Some(other) => other.to_string(),
    }
}

fn numbers_match(a: &serde_json::Number, b: &serde_json::Number, tol: f64) -> bool {
    if let (Some(x), Some(y)) = (a.as_i64(), b.as_i64()) {
        return x == y;
    }
    if let (Some(x), Some(y)) = (a.as_u64(), b.as_u64()) {
        return x == y;
    }
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0),
        _ => false,
    }
}

fn walk(left: &Value, right: &Value, tol: f64, path: &str, out: &mut Vec<DiffEntry>) {
    match (left, right) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                if path == "$" && key == "timings" {
                    continue;
                }
                let child = format!("{path}.{key}");
                match (a.get(key), b.get(key)) {
                    (Some(l), Some(r)) => walk(l, r, tol, &child, out),
                    (l, r) => out.push(DiffEntry {
                        path: child,
                        left: describe(l),
                        right: describe(r),
                    }),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                out.push(DiffEntry {
                    path: path.into(),
                    left: describe(Some(left)),
                    right: describe(Some(right)),
                });
                return;
            }
            for (i, (l, r)) in a.iter().zip(b).enumerate() {
                walk(l, r, tol, &format!("{path}[{i}]"), out);
            }
        }
        (Value::Number(a), Value::Number(b)) => {
            if !numbers_match(a, b, tol) {
                out.push(DiffEntry {
                    path: path.into(),
                    left: a.to_string(),
                    right: b.to_string(),
                });
            }
        }
        (l, r) => {
            if l != r {
                out.push(DiffEntry {
                    path: path.into(),
                    left: describe(Some(l)),
                    right: describe(Some(r)),
                });
            }
        }
    }
}
