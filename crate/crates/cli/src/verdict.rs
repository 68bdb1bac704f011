//! Verdict records and their JSON Lines encoding.

use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = include_str!("../schema/verdict.v1.json");

/// One judged quantity. `pass` is authoritative; `predicted` and `tolerance`
/// describe the test: for two-sided checks `|measured − predicted| ≤ tolerance`,
/// for bounds `predicted` is the bound and `tolerance` its slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    #[serde(deserialize_with = "nullable")]
    pub predicted: f64,
    #[serde(deserialize_with = "nullable")]
    pub measured: f64,
    #[serde(deserialize_with = "nullable")]
    pub tolerance: f64,
    pub pass: bool,
}

/// `null` stands for a non-finite number.
fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Verdict {
    pub fn near(name: impl Into<String>, predicted: f64, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            predicted,
            measured,
            tolerance,
            pass: (measured - predicted).abs() <= tolerance,
        }
    }

    /// `measured ≤ bound + slack`.
    pub fn at_most(name: impl Into<String>, bound: f64, measured: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            predicted: bound,
            measured,
            tolerance: slack,
            pass: measured <= bound + slack,
        }
    }

    /// `measured ≥ bound − slack`.
    pub fn at_least(name: impl Into<String>, bound: f64, measured: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            predicted: bound,
            measured,
            tolerance: slack,
            pass: measured >= bound - slack,
        }
    }

    /// `lo ≤ measured ≤ hi`, recorded as centre and half-width.
    pub fn within(name: impl Into<String>, lo: f64, hi: f64, measured: f64) -> Self {
        Self {
            name: name.into(),
            predicted: 0.5 * (lo + hi),
            measured,
            tolerance: 0.5 * (hi - lo),
            pass: measured >= lo && measured <= hi,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            predicted: 1.0,
            measured: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: measured {:.6e}, predicted {:.6e}, tolerance {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.predicted,
            self.tolerance
        )
    }
}

pub fn to_jsonl(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v).expect("verdicts serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<Verdict>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// Checks a record against the shipped schema: exactly the declared
/// properties, each of the declared JSON type.
pub fn conforms(record: &serde_json::Value) -> Result<(), String> {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).map_err(|e| e.to_string())?;
    let props = schema["properties"].as_object().ok_or("schema lacks properties")?;
    let obj = record.as_object().ok_or("record is not an object")?;
    for req in schema["required"].as_array().ok_or("schema lacks required")? {
        let key = req.as_str().ok_or("bad required entry")?;
        if !obj.contains_key(key) {
            return Err(format!("missing `{key}`"));
        }
    }
    for (key, value) in obj {
        let spec = props.get(key).ok_or_else(|| format!("unexpected `{key}`"))?;
        let types: Vec<&str> = match &spec["type"] {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(a) => a.iter().filter_map(|t| t.as_str()).collect(),
            _ => return Err(format!("schema type of `{key}` unreadable")),
        };
        let actual = match value {
            serde_json::Value::Null => "null",
            serde_json::Value::Bool(_) => "boolean",
            serde_json::Value::Number(_) => "number",
            serde_json::Value::String(_) => "string",
            serde_json::Value::Array(_) => "array",
            serde_json::Value::Object(_) => "object",
        };
        if !types.contains(&actual) {
            return Err(format!("`{key}` is {actual}, expected {types:?}"));
        }
    }
    Ok(())
}
