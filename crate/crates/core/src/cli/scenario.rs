//! Scenario files: which protocol instance a command targets.
//!
//! A scenario is a small JSON document. Four instances ship embedded in
//! the binary and are addressed by name (`leader3.json`, `leader4.json`,
//! `repl-3s-1c.json`, `auth-2a.json`, with or without the extension); any
//! other argument is read from the filesystem.

use crate::simnet::leader::LeaderProgramKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    /// Ring leader election over lossy channels.
    #[serde(rename_all = "kebab-case")]
    Leader {
        ring: usize,
        #[serde(default = "default_loss")]
        loss_percent: u8,
        #[serde(default = "default_program")]
        program: LeaderProgramKind,
    },
    /// Primary-backup replication over reliable FIFO channels.
    #[serde(rename_all = "kebab-case")]
    Repl {
        servers: u32,
        clients: u32,
        ops: Vec<i64>,
        #[serde(default)]
        crash: Option<CrashSpec>,
        #[serde(default = "default_detect_delay")]
        detect_delay: usize,
        /// The broken variant that commits without waiting for backups.
        #[serde(default)]
        skip_ack_wait: bool,
    },
    /// Two-party authentication against an active attacker.
    #[serde(rename_all = "kebab-case")]
    Auth {
        initiator: String,
        responder: String,
        #[serde(default = "default_runs")]
        runs: u32,
        /// The weakened variant whose reply omits the initiator's name.
        #[serde(default)]
        unnamed_reply: bool,
    },
}

/// A scripted fail-stop crash, scenario-file spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CrashSpec {
    pub node: String,
    pub at_step: usize,
}

fn default_loss() -> u8 {
    30
}

fn default_program() -> LeaderProgramKind {
    LeaderProgramKind::StoreForwardMax
}

fn default_detect_delay() -> usize {
    10
}

fn default_runs() -> u32 {
    1
}

impl Scenario {
    /// One-line description for the human summary.
    pub fn describe(&self) -> String {
        match self {
            Scenario::Leader {
                ring,
                loss_percent,
                program,
            } => format!(
                "leader election, ring of {ring}, {loss_percent}% loss, program {}",
                match program {
                    LeaderProgramKind::StoreForwardMax => "store-forward-max",
                    LeaderProgramKind::UnbufferedSend => "unbuffered-send",
                }
            ),
            Scenario::Repl {
                servers,
                clients,
                ops,
                crash,
                skip_ack_wait,
                ..
            } => format!(
                "replication, {servers} servers, {clients} clients, ops {ops:?}{}{}",
                match crash {
                    Some(c) => format!(", crash {} at step {}", c.node, c.at_step),
                    None => String::new(),
                },
                if *skip_ack_wait { ", no ack wait" } else { "" }
            ),
            Scenario::Auth {
                initiator,
                responder,
                runs,
                unnamed_reply,
            } => format!(
                "authentication, {initiator} with {responder}, {runs} run(s) each{}",
                if *unnamed_reply { ", unnamed reply" } else { "" }
            ),
        }
    }
}

const LEADER3: &str = r#"{
  "kind": "leader",
  "ring": 3,
  "loss-percent": 30,
  "program": "store-forward-max"
}
"#;

const LEADER4: &str = r#"{
  "kind": "leader",
  "ring": 4,
  "loss-percent": 30,
  "program": "store-forward-max"
}
"#;

const REPL_3S_1C: &str = r#"{
  "kind": "repl",
  "servers": 3,
  "clients": 1,
  "ops": [7, 4],
  "crash": { "node": "srv:1", "at-step": 50 },
  "detect-delay": 10
}
"#;

const AUTH_2A: &str = r#"{
  "kind": "auth",
  "initiator": "A",
  "responder": "B",
  "runs": 1
}
"#;

/// The embedded scenario for a builtin name, extension optional.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name.strip_suffix(".json").unwrap_or(name) {
        "leader3" => Some(LEADER3),
        "leader4" => Some(LEADER4),
        "repl-3s-1c" => Some(REPL_3S_1C),
        "auth-2a" => Some(AUTH_2A),
        _ => None,
    }
}

/// Builtin names in canonical form.
pub const BUILTIN_NAMES: [&str; 4] = [
    "leader3.json",
    "leader4.json",
    "repl-3s-1c.json",
    "auth-2a.json",
];

/// Resolves a `--scenario` argument: embedded name first, then a file
/// path. Returns the scenario and the label to report it under.
pub fn load(arg: &str) -> Result<(Scenario, String), String> {
    let (text, label) = match builtin(arg) {
        Some(text) => (
            text.to_string(),
            format!(
                "{}.json",
                arg.strip_suffix(".json").unwrap_or(arg)
            ),
        ),
        None => {
            let text = std::fs::read_to_string(arg)
                .map_err(|e| format!("scenario {arg}: not a builtin ({}) and not readable: {e}",
                    BUILTIN_NAMES.join(", ")))?;
            (text, arg.to_string())
        }
    };
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| format!("scenario {label}: {e}"))?;
    validate(&scenario).map_err(|e| format!("scenario {label}: {e}"))?;
    Ok((scenario, label))
}

fn validate(s: &Scenario) -> Result<(), String> {
    match s {
        Scenario::Leader { ring, loss_percent, .. } => {
            if *ring < 1 {
                return Err("ring must have at least one node".into());
            }
            if *ring > 6 {
                return Err("rings beyond 6 nodes are not supported".into());
            }
            if *loss_percent > 100 {
                return Err("loss-percent must be at most 100".into());
            }
        }
        Scenario::Repl { servers, clients, ops, crash, .. } => {
            if *servers < 1 || *clients < 1 {
                return Err("need at least one server and one client".into());
            }
            if *servers > 4 || *clients > 2 {
                return Err("at most 4 servers and 2 clients are supported".into());
            }
            if ops.is_empty() {
                return Err("ops must be nonempty".into());
            }
            if let Some(c) = crash {
                let ok = (1..=*servers).any(|p| c.node == format!("srv:{p}"));
                if !ok {
                    return Err(format!("crash node {} is not a server of this scenario", c.node));
                }
            }
        }
        Scenario::Auth { initiator, responder, runs, .. } => {
            if initiator == responder {
                return Err("initiator and responder must differ".into());
            }
            if initiator == "E" || responder == "E" {
                return Err("the name E is reserved for the attacker".into());
            }
            if *runs < 1 || *runs > 2 {
                return Err("runs must be 1 or 2".into());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        for name in BUILTIN_NAMES {
            let (scenario, label) = load(name).unwrap();
            assert_eq!(label, name);
            assert!(!scenario.describe().is_empty());
        }
    }

    #[test]
    fn the_extension_is_optional() {
        assert_eq!(load("leader3").unwrap(), load("leader3.json").unwrap());
    }

    #[test]
    fn unknown_names_and_missing_files_are_config_errors() {
        let err = load("leader99.json").unwrap_err();
        assert!(err.contains("not a builtin"), "{err}");
    }

    #[test]
    fn scenario_files_load_from_disk() {
        let dir = std::env::temp_dir().join("igloo-scenario-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("two.json");
        std::fs::write(&path, r#"{ "kind": "leader", "ring": 2 }"#).unwrap();
        let (scenario, label) = load(path.to_str().unwrap()).unwrap();
        assert_eq!(label, path.to_str().unwrap());
        assert!(matches!(scenario, Scenario::Leader { ring: 2, loss_percent: 30, .. }));
    }

    #[test]
    fn malformed_scenarios_are_rejected() {
        let dir = std::env::temp_dir().join("igloo-scenario-test");
        std::fs::create_dir_all(&dir).unwrap();
        for (name, text) in [
            ("unknown-field.json", r#"{ "kind": "leader", "ring": 3, "bogus": 1 }"#),
            ("no-servers.json", r#"{ "kind": "repl", "servers": 0, "clients": 1, "ops": [1] }"#),
            ("same-agent.json", r#"{ "kind": "auth", "initiator": "A", "responder": "A" }"#),
            ("reserved.json", r#"{ "kind": "auth", "initiator": "E", "responder": "B" }"#),
            (
                "bad-crash.json",
                r#"{ "kind": "repl", "servers": 2, "clients": 1, "ops": [1],
                     "crash": { "node": "srv:9", "at-step": 3 } }"#,
            ),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).unwrap();
            assert!(load(path.to_str().unwrap()).is_err(), "{name} should fail");
        }
    }
}
