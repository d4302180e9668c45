//! The report every command emits and the exit-code contract.
//!
//! Reports serialize to JSON under the versioned schema name `igloo-kit/1`;
//! the schema itself is published at `docs/report-schema.json`. Exit codes:
//! 0 all checks passed, 1 some check failed, 2 usage or configuration
//! error (no report is produced), 3 a search budget was exhausted before
//! a verdict.

use serde::Serialize;
use std::fmt;

/// Schema identifier stamped into every report.
pub const SCHEMA: &str = "igloo-kit/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    BudgetExceeded,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::BudgetExceeded => "BUDGET-EXCEEDED",
        })
    }
}

/// One named verdict inside a report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    /// Command-specific payload (simulation outcome, traces, rendered
    /// text); `null` when a command has none.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: impl Into<String>, scenario: Option<String>) -> Report {
        Report {
            schema: SCHEMA,
            command: command.into(),
            scenario,
            status: Status::Pass,
            exit_code: 0,
            checks: Vec::new(),
            data: serde_json::Value::Null,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.push_status(
            name,
            if ok { Status::Pass } else { Status::Fail },
            detail,
        );
    }

    pub fn push_status(
        &mut self,
        name: impl Into<String>,
        status: Status,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.into(),
            status,
            detail: detail.into(),
        });
        // Fail dominates budget exhaustion, which dominates pass.
        self.status = self.status.max(status);
        self.exit_code = match self.status {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::BudgetExceeded => 3,
        };
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The human summary: one line per check, then the overall verdict.
    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        if let Some(scenario) = &self.scenario {
            out.push_str(&format!("{}: scenario {}\n", self.command, scenario));
        } else {
            out.push_str(&format!("{}\n", self.command));
        }
        for c in &self.checks {
            out.push_str(&format!("  {}: {}", c.name, c.status));
            if !c.detail.is_empty() {
                out.push_str(&format!(" ({})", c.detail));
            }
            out.push('\n');
        }
        out.push_str(&format!("overall: {}\n", self.status));
        out
    }
}

/// A command that could not run at all; mapped to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<String> for ConfigError {
    fn from(s: String) -> ConfigError {
        ConfigError(s)
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    /// Interprets the subset of JSON Schema the published schema uses:
    /// type, required, properties, items, enum, additionalProperties.
    fn conforms(schema: &Value, v: &Value, path: &str) -> Result<(), String> {
        if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
            if !allowed.contains(v) {
                return Err(format!("{path}: {v} not in {allowed:?}"));
            }
        }
        if let Some(ty) = schema.get("type").and_then(Value::as_str) {
            let ok = match ty {
                "object" => v.is_object(),
                "array" => v.is_array(),
                "string" => v.is_string(),
                "integer" => v.is_i64() || v.is_u64(),
                "boolean" => v.is_boolean(),
                other => return Err(format!("{path}: unhandled schema type {other}")),
            };
            if !ok {
                return Err(format!("{path}: expected {ty}, got {v}"));
            }
        }
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required {
                let key = key.as_str().unwrap();
                if v.get(key).is_none() {
                    return Err(format!("{path}: missing required field {key}"));
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            if let Some(obj) = v.as_object() {
                for (key, val) in obj {
                    match props.get(key) {
                        Some(sub) => conforms(sub, val, &format!("{path}.{key}"))?,
                        None => {
                            if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                                return Err(format!("{path}: unexpected field {key}"));
                            }
                        }
                    }
                }
            }
        }
        if let Some(items) = schema.get("items") {
            if let Some(arr) = v.as_array() {
                for (i, val) in arr.iter().enumerate() {
                    conforms(items, val, &format!("{path}[{i}]"))?;
                }
            }
        }
        Ok(())
    }

    fn published_schema() -> Value {
        serde_json::from_str(include_str!("../../../../docs/report-schema.json")).unwrap()
    }

    #[test]
    fn reports_conform_to_the_published_schema() {
        let schema = published_schema();

        let mut plain = Report::new("check-composition", None);
        plain.push("trace-equivalence", true, "100 trials");

        let mut failing = Report::new("simulate", Some("leader3.json".into()));
        failing.push("monitor-violations", false, "2 denials");
        failing.data = serde_json::json!({"summary": {"steps": 10}});

        let mut budget = Report::new("check-refinement", Some("leader4.json".into()));
        budget.push_status("protocol-refines-abstract", Status::BudgetExceeded, "1000000 pairs");

        for report in [&plain, &failing, &budget] {
            let v: Value = serde_json::from_str(&report.to_json()).unwrap();
            conforms(&schema, &v, "report").unwrap();
        }
    }

    #[test]
    fn the_validator_rejects_nonconforming_documents() {
        let schema = published_schema();
        let bad: Value = serde_json::json!({
            "schema": "igloo-kit/2",
            "command": "x",
            "status": "pass",
            "exit-code": 0,
            "checks": []
        });
        assert!(conforms(&schema, &bad, "report").is_err());
        let missing: Value = serde_json::json!({ "schema": "igloo-kit/1" });
        assert!(conforms(&schema, &missing, "report").is_err());
    }

    #[test]
    fn failure_dominates_budget_exhaustion_in_the_exit_code() {
        let mut r = Report::new("check-refinement", None);
        r.push_status("a", Status::BudgetExceeded, "");
        assert_eq!(r.exit_code, EXIT_BUDGET);
        r.push("b", false, "");
        assert_eq!(r.exit_code, EXIT_FAIL);
        r.push("c", true, "");
        assert_eq!(r.exit_code, EXIT_FAIL);
    }

    #[test]
    fn the_human_summary_names_every_check() {
        let mut r = Report::new("simulate", Some("leader3.json".into()));
        r.push("monitor-violations", true, "none in 2000 steps");
        r.push("replay", true, "");
        let text = r.human_summary();
        assert!(text.contains("monitor-violations: PASS"));
        assert!(text.contains("replay: PASS"));
        assert!(text.ends_with("overall: PASS\n"));
    }
}
