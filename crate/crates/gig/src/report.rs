//! Machine-readable reports and their canonical JSON rendering.
//!
//! Rendering is deterministic: struct fields keep declaration order, map
//! entries keep insertion order, and every float is written with 17
//! significant digits so equal inputs produce byte-identical output.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{GigError, Result};
use crate::seed::SeedPlan;
use crate::stats::Bin;

/// Schema version stamped into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Pass/fail verdict of a probe against its declared thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Input was degenerate (e.g. constant); thresholds do not apply.
    Degenerate,
}

/// Outcome of one verification probe.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub schema_version: u32,
    pub library_version: String,
    pub probe_name: String,
    /// Description of the generating law / inputs.
    pub params_tag: String,
    /// Named scalar statistics, in insertion order.
    pub statistics: serde_json::Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_table: Option<Vec<Bin>>,
    pub verdict: Verdict,
    pub seed_plan: SeedPlan,
    /// Free-form flags ("degenerate input", "cd <= 1", ...).
    pub notes: Vec<String>,
}

impl ProbeReport {
    pub fn new(
        probe_name: impl Into<String>,
        params_tag: impl Into<String>,
        seed_plan: SeedPlan,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            library_version: crate::VERSION.to_string(),
            probe_name: probe_name.into(),
            params_tag: params_tag.into(),
            statistics: serde_json::Map::new(),
            p_value: None,
            bin_table: None,
            verdict: Verdict::Fail,
            seed_plan,
            notes: Vec::new(),
        }
    }

    /// Records a named statistic (insertion order is preserved on output).
    pub fn stat(&mut self, name: &str, value: f64) -> &mut Self {
        self.statistics.insert(name.to_string(), json_float(value));
        self
    }

    pub fn set_p_value(&mut self, p: f64) -> Result<&mut Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(GigError::Domain(format!("p-value {p} outside [0, 1]")));
        }
        self.p_value = Some(p);
        Ok(self)
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// A float as a JSON value, with non-finite values mapped to null.
fn json_float(value: f64) -> Value {
    serde_json::Number::from_f64(value).map_or(Value::Null, Value::Number)
}

/// Serializes anything `Serialize` into canonical single-line JSON.
pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)
        .map_err(|e| GigError::Config(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &tree);
    Ok(out)
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                write_float(out, n.as_f64().unwrap_or(f64::NAN));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", Value::String(key.clone()));
                out.push(':');
                write_value(out, item);
            }
            out.push('}');
        }
    }
}

/// 17 significant digits, scientific notation; integral values that fit
/// exactly still go through the same path so formatting is uniform.
fn write_float(out: &mut String, value: f64) {
    if !value.is_finite() {
        out.push_str("null");
    } else {
        let _ = write!(out, "{value:.16e}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_report_round_trip_shape() {
        let mut report = ProbeReport::new("demo", "GIG(p = 1, a = 2, b = 3)", SeedPlan::new(7, 0));
        report.stat("flatness", 1.25);
        report.set_p_value(0.5).unwrap();
        report.verdict = Verdict::Pass;
        report.note("example");
        let json = render_json(&report).unwrap();
        assert!(json.contains("\"schema_version\":1"));
        assert!(json.contains("\"probe_name\":\"demo\""));
        assert!(json.contains("\"flatness\":1.2500000000000000e0"));
        assert!(json.contains("\"p_value\":5.0000000000000000e-1"));
        assert!(json.contains("\"verdict\":\"pass\""));
        assert!(json.contains("\"master_seed\":7"));
        // Determinism: rendering twice is byte-identical.
        assert_eq!(json, render_json(&report).unwrap());
    }

    #[test]
    fn floats_use_seventeen_significant_digits() {
        #[derive(Serialize)]
        struct Payload {
            x: f64,
        }
        let json = render_json(&Payload { x: 1.0 / 3.0 }).unwrap();
        assert_eq!(json, "{\"x\":3.3333333333333331e-1}");
        let json = render_json(&Payload {
            x: 0.398_942_280_401_432_7,
        })
        .unwrap();
        assert_eq!(json, "{\"x\":3.9894228040143270e-1}");
        // 17 significant digits round-trip every f64 exactly.
        assert_eq!(
            "3.9894228040143270e-1".parse::<f64>().unwrap(),
            0.398_942_280_401_432_7
        );
        let json = render_json(&Payload { x: f64::NAN }).unwrap();
        assert_eq!(json, "{\"x\":null}");
    }

    #[test]
    fn integers_render_plainly() {
        #[derive(Serialize)]
        struct Payload {
            n: u64,
            k: i64,
        }
        let json = render_json(&Payload { n: 100000, k: -3 }).unwrap();
        assert_eq!(json, "{\"n\":100000,\"k\":-3}");
    }

    #[test]
    fn p_value_outside_unit_interval_rejected() {
        let mut report = ProbeReport::new("demo", "tag", SeedPlan::new(0, 0));
        assert!(report.set_p_value(1.5).is_err());
        assert!(report.set_p_value(-0.1).is_err());
        assert!(report.set_p_value(f64::NAN).is_err());
    }

    #[test]
    fn string_escaping_is_json_safe() {
        #[derive(Serialize)]
        struct Payload {
            s: String,
        }
        let json = render_json(&Payload {
            s: "a\"b\\c\n".into(),
        })
        .unwrap();
        assert_eq!(json, "{\"s\":\"a\\\"b\\\\c\\n\"}");
    }
}
