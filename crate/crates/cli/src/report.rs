//! The JSON report written for every scenario. Layout documented in
//! `docs/report-schema.md`.

use serde::Serialize;
use serde_json::Value;

use rotator_core::Error;

use crate::scenario::Scenario;

pub const REPORT_SCHEMA: &str = "rotator-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The model refused the scenario on physical grounds (exit code 3).
    Refused,
}

/// One reported number (or structure) and the operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub quantity: String,
    pub operation: &'static str,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl Diagnostic {
    pub fn from_error(e: &Error) -> Self {
        let (kind, detail) = match e {
            Error::Domain { what, value, reason } => (
                "domain",
                serde_json::json!({"what": what, "value": value, "reason": reason}),
            ),
            Error::NonSmoothPoint => ("non_smooth_point", Value::Null),
            Error::NullCollinear(c) => ("null_collinear", serde_json::json!({"one_minus_n_dot_v": c})),
            Error::Superluminal(v) => ("superluminal", serde_json::json!({"v_squared": v})),
            Error::Rotationless(_) => ("rotationless", Value::Null),
            Error::DegenerateHessian(d) => ("degenerate_hessian", serde_json::to_value(d).unwrap_or(Value::Null)),
            Error::StepUnderflow { t, h } => ("step_underflow", serde_json::json!({"t": t, "h": h})),
            Error::Singularity { t, kind } => (
                "singularity",
                serde_json::json!({"t": t, "kind": serde_json::to_value(kind).unwrap_or(Value::Null)}),
            ),
            Error::Stencil { attempts, .. } => ("stencil", serde_json::json!({"attempts": attempts})),
            Error::InvalidParameter { name, .. } => ("invalid_parameter", serde_json::json!({"name": name})),
            Error::Parse(_) => ("parse", Value::Null),
            Error::NotApplicable(_) => ("not_applicable", Value::Null),
            Error::Indeterminate(_) => ("indeterminate", Value::Null),
            Error::Inadmissible(_) => ("inadmissible", Value::Null),
        };
        Diagnostic {
            kind,
            message: e.to_string(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub producer: String,
    pub task: &'static str,
    /// The scenario after defaults were filled in.
    pub scenario: Scenario,
    pub seed: u64,
    /// Derivative engine: `dual` or `finite_difference`.
    pub engine: &'static str,
    pub status: Status,
    pub claims: Vec<Claim>,
    /// Data files written next to the report, by name.
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<Diagnostic>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }
}

/// Accumulates claims for one task.
#[derive(Debug, Default)]
pub struct Claims(pub Vec<Claim>);

impl Claims {
    pub fn push(&mut self, quantity: impl Into<String>, operation: &'static str, value: impl Serialize) {
        self.0.push(Claim {
            quantity: quantity.into(),
            operation,
            value: serde_json::to_value(value).unwrap_or(Value::Null),
        });
    }
}
