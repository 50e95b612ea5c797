use serde::Serialize;
use serde_json::{Number, Value};

/// Rewrites every float as `{:.16e}` (17 significant digits) so output is
/// byte-stable across runs and platforms. Integers are left alone.
fn normalise(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            let s = n.to_string();
            if s.contains(['.', 'e', 'E']) {
                match s.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Number(float(x)),
                    _ => Value::Null,
                }
            } else {
                Value::Number(n)
            }
        }
        Value::Array(a) => Value::Array(a.into_iter().map(normalise).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalise(v))).collect()),
        other => other,
    }
}

fn float(x: f64) -> Number {
    format!("{x:.16e}").parse().expect("formatted float is a valid JSON number")
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    normalise(serde_json::to_value(v).expect("output types serialise"))
}

pub fn render(v: Value) -> String {
    serde_json::to_string_pretty(&normalise(v)).expect("values serialise")
}
