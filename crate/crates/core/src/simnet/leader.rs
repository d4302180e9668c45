//! Simulated deployment of the ring election components.
//!
//! Each node runs a small handwritten program against a monitor built from
//! its component model. The network is the lossy-set channel: an address
//! holds the set of ids ever sent to it, deliveries may repeat, and loss is
//! the scheduler's choice. The programs implement the store-and-forward
//! optimization that keeps only the largest id seen, which stays inside the
//! component model, so a correct run never produces a DENY.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::event::Event;
use crate::kernel::es::EventSystem;
use crate::monitor::{monitor_new, Backend, Monitor, Verdict};
use crate::protocols::leader::{InterfaceState, RingConfig};
use crate::simnet::replay::{replay_events, ReplayVerdict};
use crate::simnet::{
    ChannelModel, LogRecord, RecordKind, SimMode, SimOutcome, SimSummary, SimTermination,
    TraceLog,
};
use crate::value::Value;

/// Which implementation each node runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeaderProgramKind {
    /// Sends its own id, then forwards only the largest id seen so far,
    /// acknowledging each adoption to its monitor.
    StoreForwardMax,
    /// Same, except it forwards adopted ids without ever buffering them,
    /// so its first forward is out of model.
    UnbufferedSend,
}

/// One node's program state. The program is a plain sequential loop in
/// disguise: set up once, then alternate sending the current candidate and
/// reacting to deliveries.
struct LeaderProgram {
    my_id: i64,
    out_addr: i64,
    to_send: i64,
    started: bool,
    done: bool,
    forgetful: bool,
}

enum IoRequest {
    Output { bio: &'static str, out: Value },
    Ghost { bio: &'static str, out: Value },
}

impl LeaderProgram {
    fn new(my_id: i64, out_addr: i64, kind: LeaderProgramKind) -> LeaderProgram {
        LeaderProgram {
            my_id,
            out_addr,
            to_send: my_id,
            started: false,
            done: false,
            forgetful: matches!(kind, LeaderProgramKind::UnbufferedSend),
        }
    }

    fn send_request(&self) -> IoRequest {
        IoRequest::Output {
            bio: "send",
            out: Value::pair(Value::Int(self.to_send), Value::Int(self.out_addr)),
        }
    }

    /// A scheduler turn with nothing delivered.
    fn poll(&mut self) -> Vec<IoRequest> {
        if self.done {
            return Vec::new();
        }
        if !self.started {
            self.started = true;
            return vec![
                IoRequest::Ghost {
                    bio: "setup",
                    out: Value::Unit,
                },
                self.send_request(),
            ];
        }
        // Retransmit: the channel may have lost everything sent so far.
        vec![self.send_request()]
    }

    /// A scheduler turn delivering id `m` (the receive itself has already
    /// gone through the monitor).
    fn on_receive(&mut self, m: i64) -> Vec<IoRequest> {
        if self.done {
            return Vec::new();
        }
        if m == self.my_id {
            self.done = true;
            return vec![IoRequest::Ghost {
                bio: "elect",
                out: Value::Unit,
            }];
        }
        if m > self.to_send {
            self.to_send = m;
            if self.forgetful {
                return Vec::new();
            }
            return vec![IoRequest::Ghost {
                bio: "accept",
                out: Value::Int(m),
            }];
        }
        Vec::new()
    }

    fn wants_poll(&self) -> bool {
        !self.done
    }
}

/// A finished run: the serializable outcome plus the per-node monitors for
/// cross-checking the log against what each node observed.
pub struct LeaderRun {
    pub outcome: SimOutcome,
    pub monitors: BTreeMap<i64, Monitor<crate::protocols::leader::IfaceNode>>,
}

fn node_name(i: i64) -> String {
    format!("node:{i}")
}

fn chan_name(addr: i64) -> String {
    format!("addr:{addr}")
}

enum Choice {
    Poll(i64),
    Deliver(i64, i64),
}

/// Runs the election over a seeded lossy network. `loss_percent` is the
/// chance a chosen delivery is lost instead. Identical arguments give an
/// identical [`TraceLog`], byte for byte.
pub fn run_leader_sim(
    cfg: &RingConfig,
    kind: LeaderProgramKind,
    loss_percent: u8,
    seed: u64,
    max_steps: usize,
    mode: SimMode,
    backend: Backend,
) -> LeaderRun {
    assert!(loss_percent <= 100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net: BTreeMap<i64, BTreeSet<i64>> =
        cfg.addrs().into_iter().map(|a| (a, BTreeSet::new())).collect();
    let mut programs: BTreeMap<i64, LeaderProgram> = BTreeMap::new();
    let mut monitors: BTreeMap<i64, Monitor<crate::protocols::leader::IfaceNode>> =
        BTreeMap::new();
    for i in cfg.ids().iter().copied() {
        let model = crate::protocols::leader::leader_component(cfg, i);
        let monitor = monitor_new(&model, model.initial(), model.typing(), backend)
            .expect("component guards ignore inputs");
        programs.insert(i, LeaderProgram::new(i, cfg.addr(cfg.next(i)), kind));
        monitors.insert(i, monitor);
    }

    let mut records: Vec<LogRecord> = Vec::new();
    let mut summary = SimSummary::default();
    let mut termination: Option<SimTermination> = None;

    'steps: for step in 0..max_steps {
        let mut choices: Vec<Choice> = Vec::new();
        for (i, prog) in &programs {
            if prog.wants_poll() {
                choices.push(Choice::Poll(*i));
            }
            for m in &net[&cfg.addr(*i)] {
                choices.push(Choice::Deliver(*i, *m));
            }
        }
        if choices.is_empty() {
            termination = Some(SimTermination::Quiescent);
            break;
        }
        summary.steps = step + 1;

        let requests: Vec<(i64, Vec<IoRequest>)> = match choices[rng.gen_range(0..choices.len())]
        {
            Choice::Poll(i) => vec![(i, programs.get_mut(&i).unwrap().poll())],
            Choice::Deliver(i, m) => {
                let chan = chan_name(cfg.addr(i));
                let msg = Value::Int(m);
                if rng.gen_range(0..100) < loss_percent as u32 {
                    records.push(LogRecord {
                        step,
                        node: node_name(i),
                        kind: RecordKind::Drop { chan, msg },
                    });
                    continue;
                }
                records.push(LogRecord {
                    step,
                    node: node_name(i),
                    kind: RecordKind::Deliver { chan, msg },
                });
                let verdict = monitors
                    .get_mut(&i)
                    .unwrap()
                    .commit("receive", &Value::Unit, &Value::Int(m));
                records.push(LogRecord {
                    step,
                    node: node_name(i),
                    kind: RecordKind::Action {
                        bio: "receive".into(),
                        out: Value::Unit,
                        input: Value::Int(m),
                        ghost: false,
                        verdict: verdict.code().into(),
                    },
                });
                if !verdict.is_permit() {
                    summary.violations += 1;
                    if matches!(mode, SimMode::Strict) {
                        termination = Some(SimTermination::MonitorViolation {
                            node: node_name(i),
                            bio: "receive".into(),
                            out: Value::Unit,
                            at_step: step,
                        });
                        break 'steps;
                    }
                }
                vec![(i, programs.get_mut(&i).unwrap().on_receive(m))]
            }
        };

        for (i, reqs) in requests {
            for req in reqs {
                let (bio, out, ghost, verdict) = match &req {
                    IoRequest::Output { bio, out } => {
                        let mon = monitors.get_mut(&i).unwrap();
                        let phase1 = mon.request_output(bio, out);
                        let verdict = if phase1.is_permit() {
                            mon.commit(bio, out, &Value::Unit)
                        } else {
                            phase1
                        };
                        (*bio, out.clone(), false, verdict)
                    }
                    IoRequest::Ghost { bio, out } => {
                        let verdict =
                            monitors.get_mut(&i).unwrap().commit_ghost(bio, out, &Value::Unit);
                        (*bio, out.clone(), true, verdict)
                    }
                };
                records.push(LogRecord {
                    step,
                    node: node_name(i),
                    kind: RecordKind::Action {
                        bio: bio.into(),
                        out: out.clone(),
                        input: Value::Unit,
                        ghost,
                        verdict: verdict.code().into(),
                    },
                });
                let proceed = verdict.is_permit() || {
                    summary.violations += 1;
                    if matches!(mode, SimMode::Strict) {
                        termination = Some(SimTermination::MonitorViolation {
                            node: node_name(i),
                            bio: bio.into(),
                            out: out.clone(),
                            at_step: step,
                        });
                        false
                    } else {
                        true
                    }
                };
                if !proceed {
                    break 'steps;
                }
                if matches!(verdict, Verdict::Permit) && bio == "elect" {
                    summary.elects += 1;
                }
                // The effect happens after the monitor call; in audit mode
                // even a denied send reaches the network.
                if bio == "send" {
                    let Value::List(parts) = &out else {
                        unreachable!("send output is a pair")
                    };
                    let (m, a) = (parts[0].clone(), parts[1].as_int().unwrap());
                    net.get_mut(&a).unwrap().insert(m.as_int().unwrap());
                    records.push(LogRecord {
                        step,
                        node: node_name(i),
                        kind: RecordKind::Send {
                            chan: chan_name(a),
                            msg: m,
                        },
                    });
                }
            }
        }
    }

    let termination = termination.unwrap_or(SimTermination::StepLimit);
    LeaderRun {
        outcome: SimOutcome {
            log: TraceLog {
                scenario: format!("leader{}", cfg.ids().len()),
                channel: ChannelModel::LossySet,
                seed,
                records,
            },
            summary,
            termination,
        },
        monitors,
    }
}

/// Maps a run's permitted actions to events of the monolithic interface
/// model. `gamma` is the deployment table: it says which node ids exist.
/// Fails on a record naming an unknown node or a malformed action shape.
pub fn interface_events_of_log(
    log: &TraceLog,
    gamma: &BTreeMap<i64, (i64, i64)>,
) -> Result<Vec<Event>, String> {
    let mut events = Vec::new();
    for r in &log.records {
        let RecordKind::Action {
            bio,
            out,
            input,
            verdict,
            ..
        } = &r.kind
        else {
            continue;
        };
        if verdict != "PERMIT" {
            continue;
        }
        let id: i64 = r
            .node
            .strip_prefix("node:")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("unrecognized node name {:?}", r.node))?;
        if !gamma.contains_key(&id) {
            return Err(format!("node {id} is not part of the deployment"));
        }
        let i = Value::Int(id);
        let event = match bio.as_str() {
            "receive" => Event::new("receive", vec![i, input.clone()]),
            "send" => {
                let Value::List(parts) = out else {
                    return Err("send output is not a pair".into());
                };
                Event::new("send", vec![i, parts[0].clone(), parts[1].clone()])
            }
            "setup" => Event::new("setup", vec![i]),
            "accept" => Event::new("accept", vec![i, out.clone()]),
            "elect" => Event::new("elect", vec![i]),
            other => return Err(format!("unrecognized action {other:?}")),
        };
        events.push(event);
    }
    Ok(events)
}

/// Replays a log's permitted actions against the monolithic interface
/// model. A log whose mapping fails structurally counts as stuck at its
/// first event.
pub fn replay_against_model(
    log: &TraceLog,
    interface: &EventSystem<InterfaceState>,
    gamma: &BTreeMap<i64, (i64, i64)>,
) -> ReplayVerdict {
    match interface_events_of_log(log, gamma) {
        Ok(events) => replay_events(interface, &events),
        Err(_) => ReplayVerdict::FailAt {
            index: 0,
            event: Event::skip(),
        },
    }
}

/// The nodes that committed an elect action in the log.
pub fn elected_nodes(log: &TraceLog) -> BTreeSet<String> {
    log.records
        .iter()
        .filter(|r| {
            matches!(
                &r.kind,
                RecordKind::Action { bio, verdict, .. } if bio == "elect" && verdict == "PERMIT"
            )
        })
        .map(|r| r.node.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::refine::preimage_property;
    use crate::protocols::leader::{gamma, interface_model, pi_hat, unique_leader_property};
    use crate::simnet::{check_no_fabrication, random_walk};

    fn run(seed: u64) -> LeaderRun {
        run_leader_sim(
            &RingConfig::ring(4),
            LeaderProgramKind::StoreForwardMax,
            30,
            seed,
            2000,
            SimMode::Strict,
            Backend::EsGuard,
        )
    }

    #[test]
    fn same_seed_gives_the_same_log() {
        let (a, b) = (run(7), run(7));
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(
            serde_json::to_string(&a.outcome).unwrap(),
            serde_json::to_string(&b.outcome).unwrap()
        );
        let c = run(8);
        assert_ne!(a.outcome.log, c.outcome.log, "different seed, different run");
    }

    #[test]
    fn a_clean_run_elects_the_max_and_replays() {
        let cfg = RingConfig::ring(4);
        let run = run(1);
        assert_eq!(run.outcome.summary.violations, 0);
        assert_eq!(run.outcome.summary.elects, 1);
        assert_eq!(elected_nodes(&run.outcome.log), BTreeSet::from(["node:4".to_string()]));
        assert!(check_no_fabrication(&run.outcome.log).is_ok());

        let verdict = replay_against_model(&run.outcome.log, &interface_model(&cfg), &gamma(&cfg));
        assert!(verdict.passed());

        let events = interface_events_of_log(&run.outcome.log, &gamma(&cfg)).unwrap();
        let lifted = preimage_property(&pi_hat(), &unique_leader_property());
        assert!(lifted.accepts(&events));
    }

    #[test]
    fn the_log_projects_to_each_monitors_observations() {
        let run = run(12);
        for (i, monitor) in &run.monitors {
            let projected = run.outcome.log.node_actions(&node_name(*i));
            let with_ghosts: Vec<_> = monitor
                .observed_actions(true)
                .into_iter()
                .map(|a| (a.bio, a.output, a.input))
                .collect();
            assert_eq!(
                projected
                    .iter()
                    .map(|(b, o, i, _)| (b.clone(), o.clone(), i.clone()))
                    .collect::<Vec<_>>(),
                with_ghosts
            );
            let without_ghosts: Vec<_> = monitor
                .observed_actions(false)
                .into_iter()
                .map(|a| (a.bio, a.output, a.input))
                .collect();
            assert_eq!(
                projected
                    .iter()
                    .filter(|(_, _, _, g)| !g)
                    .map(|(b, o, i, _)| (b.clone(), o.clone(), i.clone()))
                    .collect::<Vec<_>>(),
                without_ghosts
            );
        }
    }

    #[test]
    fn the_forgetful_sender_is_denied_before_anything_goes_wrong() {
        let cfg = RingConfig::ring(4);
        let strict = run_leader_sim(
            &cfg,
            LeaderProgramKind::UnbufferedSend,
            0,
            5,
            2000,
            SimMode::Strict,
            Backend::EsGuard,
        );
        let SimTermination::MonitorViolation { ref bio, .. } = strict.outcome.termination else {
            panic!("expected a violation, got {:?}", strict.outcome.termination);
        };
        assert_eq!(bio, "send");
        assert!(strict.outcome.summary.violations >= 1);
        // At the moment the monitor stops the run, the global property is
        // still intact: the flag comes first.
        let events = interface_events_of_log(&strict.outcome.log, &gamma(&cfg)).unwrap();
        let lifted = preimage_property(&pi_hat(), &unique_leader_property());
        assert!(lifted.accepts(&events));

        let audit = run_leader_sim(
            &cfg,
            LeaderProgramKind::UnbufferedSend,
            0,
            5,
            400,
            SimMode::Audit,
            Backend::EsGuard,
        );
        assert!(audit.outcome.summary.violations > 0);
        let events = interface_events_of_log(&audit.outcome.log, &gamma(&cfg)).unwrap();
        assert!(lifted.accepts(&events), "the drift never breaks the property");
    }

    #[test]
    fn corrupting_a_receive_makes_replay_fail_at_that_index() {
        let cfg = RingConfig::ring(3);
        let mut run = run_leader_sim(
            &cfg,
            LeaderProgramKind::StoreForwardMax,
            0,
            2,
            600,
            SimMode::Strict,
            Backend::EsGuard,
        );
        assert_eq!(run.outcome.summary.violations, 0);
        let log = &mut run.outcome.log;
        // Find the first permitted receive and claim an id that no one ever
        // sent to that address.
        let (pos, expected_index) = log
            .records
            .iter()
            .enumerate()
            .scan(0usize, |seen, (pos, r)| {
                if let RecordKind::Action { bio, verdict, .. } = &r.kind {
                    if verdict == "PERMIT" {
                        let at = *seen;
                        *seen += 1;
                        return Some(Some((pos, at, bio.clone())));
                    }
                }
                Some(None)
            })
            .flatten()
            .find(|(_, _, bio)| bio == "receive")
            .map(|(pos, at, _)| (pos, at))
            .expect("some receive was permitted");
        let RecordKind::Action { input, .. } = &mut log.records[pos].kind else {
            unreachable!()
        };
        *input = Value::Int(99);
        let verdict = replay_against_model(log, &interface_model(&cfg), &gamma(&cfg));
        assert_eq!(
            verdict,
            ReplayVerdict::FailAt {
                index: expected_index,
                event: Event::new(
                    "receive",
                    vec![log.records[pos].node.strip_prefix("node:").unwrap().parse().map(Value::Int).unwrap(), Value::Int(99)]
                ),
            }
        );
    }

    #[test]
    fn an_empty_log_replays_trivially() {
        let cfg = RingConfig::ring(3);
        let log = TraceLog {
            scenario: "leader3".into(),
            channel: ChannelModel::LossySet,
            seed: 0,
            records: Vec::new(),
        };
        assert!(replay_against_model(&log, &interface_model(&cfg), &gamma(&cfg)).passed());
    }

    #[test]
    fn total_loss_delivers_nothing() {
        let run = run_leader_sim(
            &RingConfig::ring(3),
            LeaderProgramKind::StoreForwardMax,
            100,
            9,
            300,
            SimMode::Strict,
            Backend::EsGuard,
        );
        assert_eq!(run.outcome.summary.elects, 0);
        assert!(run
            .outcome
            .log
            .records
            .iter()
            .all(|r| !matches!(r.kind, RecordKind::Deliver { .. })));
        assert!(run
            .outcome
            .log
            .records
            .iter()
            .any(|r| matches!(r.kind, RecordKind::Drop { .. })));
    }

    #[test]
    fn random_walks_are_seed_stable() {
        let cfg = RingConfig::ring(3);
        let es = interface_model(&cfg);
        let start = es.initial()[0].clone();
        let (t1, _) = random_walk(&es, &start, 3, 40);
        let (t2, _) = random_walk(&es, &start, 3, 40);
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), 40);
    }
}
