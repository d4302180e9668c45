//! Deterministic simulated networks for exercising deployed components.
//!
//! A simulation wires handwritten node programs to monitors built from the
//! per-node component models, runs them against a seeded scheduler and a
//! channel model, and records everything that happens in a [`TraceLog`]. The
//! log is the interface to offline analysis: replay against the layer the
//! components were carved from, global trace properties through mediators,
//! and structural checks such as no-fabrication.

use serde::{Deserialize, Serialize};

use crate::event::Trace;
use crate::kernel::es::EventSystem;
use crate::value::Value;

pub mod leader;
pub mod replay;
pub mod repl;

/// How the simulated network treats messages in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    /// Unordered, duplicating, lossy: a sent message joins a persistent set
    /// and may be delivered any number of times; loss is the scheduler never
    /// picking it.
    LossySet,
    /// Reliable FIFO queues per ordered endpoint pair.
    ReliableFifo,
}

/// A scripted fail-stop crash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCrash {
    pub node: String,
    pub at_step: usize,
}

/// Scripted faults plus the failure-detector contract: every surviving
/// observer learns of a crash within `max_detect_delay` scheduler steps,
/// the exact delay drawn per observer from the run's seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub crashes: Vec<ScriptedCrash>,
    pub max_detect_delay: usize,
}

impl FaultPlan {
    pub fn none() -> FaultPlan {
        FaultPlan {
            crashes: Vec::new(),
            max_detect_delay: 10,
        }
    }

    pub fn crash(node: impl Into<String>, at_step: usize) -> FaultPlan {
        FaultPlan {
            crashes: vec![ScriptedCrash {
                node: node.into(),
                at_step,
            }],
            max_detect_delay: 10,
        }
    }
}

impl Default for FaultPlan {
    fn default() -> Self {
        FaultPlan::none()
    }
}

/// Whether a monitor DENY aborts the run or is recorded and overridden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// First DENY ends the run with [`SimTermination::MonitorViolation`].
    Strict,
    /// DENYs are counted and the program's effect happens anyway, so the
    /// log shows how far an out-of-model implementation drifts.
    Audit,
}

/// One record in the global log. `node` is the acting node for actions and
/// faults, the sender for sends, and the recipient for deliveries and drops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub node: String,
    #[serde(flatten)]
    pub kind: RecordKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RecordKind {
    /// A committed monitor call (the verdict says whether it was permitted).
    Action {
        bio: String,
        out: Value,
        input: Value,
        ghost: bool,
        verdict: String,
    },
    /// The channel accepted a message on `chan`.
    Send { chan: String, msg: Value },
    /// The channel handed a message on `chan` to the recipient.
    Deliver { chan: String, msg: Value },
    /// The channel chose to lose a delivery on `chan`.
    Drop { chan: String, msg: Value },
    /// An environment fault, e.g. a scripted crash.
    Fault { what: String },
}

/// The globally ordered record of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLog {
    pub scenario: String,
    pub channel: ChannelModel,
    pub seed: u64,
    pub records: Vec<LogRecord>,
}

impl TraceLog {
    /// The permitted actions of one node, in log order, as
    /// (bio, output, input, ghost) tuples. This is the projection that must
    /// agree with the node's own monitor.
    pub fn node_actions(&self, node: &str) -> Vec<(String, Value, Value, bool)> {
        self.records
            .iter()
            .filter(|r| r.node == node)
            .filter_map(|r| match &r.kind {
                RecordKind::Action {
                    bio,
                    out,
                    input,
                    ghost,
                    verdict,
                } if verdict == "PERMIT" => {
                    Some((bio.clone(), out.clone(), input.clone(), *ghost))
                }
                _ => None,
            })
            .collect()
    }

    /// Every node that appears in an action record.
    pub fn nodes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if matches!(r.kind, RecordKind::Action { .. }) && !out.contains(&r.node) {
                out.push(r.node.clone());
            }
        }
        out.sort();
        out
    }

    /// The log as JSON lines, one record per line.
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Checks that every delivery in the log refers to a message the channel
/// could actually hold at that point: under [`ChannelModel::LossySet`] some
/// earlier send put it on the same channel, under
/// [`ChannelModel::ReliableFifo`] it is exactly the queue head. Returns the
/// index of the first fabricated delivery.
pub fn check_no_fabrication(log: &TraceLog) -> Result<(), usize> {
    use std::collections::BTreeMap;
    let mut sets: BTreeMap<&str, Vec<&Value>> = BTreeMap::new();
    let mut queues: BTreeMap<&str, std::collections::VecDeque<&Value>> = BTreeMap::new();
    for (idx, r) in log.records.iter().enumerate() {
        match (&r.kind, log.channel) {
            (RecordKind::Send { chan, msg }, ChannelModel::LossySet) => {
                sets.entry(chan).or_default().push(msg);
            }
            (RecordKind::Send { chan, msg }, ChannelModel::ReliableFifo) => {
                queues.entry(chan).or_default().push_back(msg);
            }
            (RecordKind::Deliver { chan, msg } | RecordKind::Drop { chan, msg }, model) => {
                match model {
                    ChannelModel::LossySet => {
                        let held = sets.get(chan.as_str()).is_some_and(|s| s.contains(&msg));
                        if !held {
                            return Err(idx);
                        }
                    }
                    ChannelModel::ReliableFifo => {
                        let queue = queues.entry(chan).or_default();
                        if queue.front() != Some(&msg) {
                            return Err(idx);
                        }
                        if matches!(r.kind, RecordKind::Deliver { .. }) {
                            queue.pop_front();
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Why the run stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum SimTermination {
    /// Nothing was enabled anywhere and no fault was still pending.
    Quiescent,
    /// The step budget ran out first.
    StepLimit,
    /// Strict mode stopped at the first monitor DENY.
    MonitorViolation {
        node: String,
        bio: String,
        out: Value,
        at_step: usize,
    },
}

/// Counts reported alongside the log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSummary {
    pub steps: usize,
    pub violations: usize,
    pub elects: usize,
    pub replies: usize,
}

/// Everything a run produces that is worth serializing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub log: TraceLog,
    pub summary: SimSummary,
    pub termination: SimTermination,
}

/// A seeded random walk over an event system, ignoring stutter moves. Stops
/// early at states with no proper successor. Useful as a lightweight
/// simulation of models that have no deployed components.
pub fn random_walk<S: Ord + Clone>(
    es: &EventSystem<S>,
    start: &S,
    seed: u64,
    max_steps: usize,
) -> (Trace, S) {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = start.clone();
    let mut trace = Vec::new();
    for _ in 0..max_steps {
        let moves: Vec<_> = es
            .successors(&state)
            .into_iter()
            .filter(|(e, _)| !e.is_skip())
            .collect();
        if moves.is_empty() {
            break;
        }
        let (event, next) = moves[rng.gen_range(0..moves.len())].clone();
        trace.push(event);
        state = next;
    }
    (trace, state)
}
