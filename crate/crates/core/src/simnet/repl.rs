//! Simulated deployment of the primary-backup components.
//!
//! Servers and clients run handwritten programs over reliable FIFO
//! channels, each bound to a monitor built from its component model. A
//! fault plan may crash servers mid-run; every survivor then learns of the
//! crash within the detector bound, at a seeded delay. After every step the
//! run re-assembles a whole-system state from the monitors, the channels,
//! and the crash record, and evaluates the consistency and liveness-record
//! predicates on it, so a breach is caught the moment it appears.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

use crate::monitor::{monitor_new, Backend, Monitor};
use crate::protocols::repl::{
    ClientNode, Endpoint, Pending, ReplLocal, ReplMsg, ReplStack, ReplState, ServerNode,
};
use crate::simnet::{
    ChannelModel, FaultPlan, LogRecord, RecordKind, SimMode, SimOutcome, SimSummary,
    SimTermination, TraceLog,
};
use crate::value::Value;

fn endpoint_name(e: Endpoint) -> String {
    match e {
        Endpoint::Server(p) => format!("srv:{p}"),
        Endpoint::Client(c) => format!("cli:{c}"),
    }
}

fn parse_endpoint(name: &str) -> Option<Endpoint> {
    if let Some(p) = name.strip_prefix("srv:") {
        return p.parse().ok().map(Endpoint::Server);
    }
    if let Some(c) = name.strip_prefix("cli:") {
        return c.parse().ok().map(Endpoint::Client);
    }
    None
}

fn chan_name(from: Endpoint, to: Endpoint) -> String {
    format!("{}->{}", endpoint_name(from), endpoint_name(to))
}

/// One outbound request a program hands to the harness.
enum ReplReq {
    Send { dst: Endpoint, msg: ReplMsg },
    Proc { src: Endpoint },
}

/// The server implementation: buffers inbound messages per source, drains
/// its outbox one send per turn, and otherwise processes one buffered
/// message, preferring the lowest source. All the protocol rules live in
/// [`ServerProgram::handle`].
struct ServerProgram {
    id: u32,
    crashed: bool,
    log: Vec<i64>,
    pend: Option<Pending>,
    believed: BTreeSet<u32>,
    inq: BTreeMap<Endpoint, Vec<ReplMsg>>,
    outq: Vec<(Endpoint, ReplMsg)>,
}

impl ServerProgram {
    fn new(id: u32, n_servers: u32) -> ServerProgram {
        ServerProgram {
            id,
            crashed: false,
            log: Vec::new(),
            pend: None,
            believed: (1..=n_servers).collect(),
            inq: BTreeMap::new(),
            outq: Vec::new(),
        }
    }

    fn is_primary(&self) -> bool {
        self.believed.first() == Some(&self.id)
    }

    fn processable(&self) -> Option<Endpoint> {
        for (src, queue) in &self.inq {
            match queue.first() {
                Some(ReplMsg::Req { .. }) => {
                    if self.pend.is_none() && self.is_primary() {
                        return Some(*src);
                    }
                }
                Some(_) => return Some(*src),
                None => {}
            }
        }
        None
    }

    fn wants_poll(&self) -> bool {
        !self.crashed && (!self.outq.is_empty() || self.processable().is_some())
    }

    fn poll(&mut self) -> Vec<ReplReq> {
        if self.crashed {
            return Vec::new();
        }
        if !self.outq.is_empty() {
            let (dst, msg) = self.outq.remove(0);
            return vec![ReplReq::Send { dst, msg }];
        }
        if let Some(src) = self.processable() {
            let queue = self.inq.get_mut(&src).unwrap();
            let msg = queue.remove(0);
            if queue.is_empty() {
                self.inq.remove(&src);
            }
            self.handle(src, msg);
            return vec![ReplReq::Proc { src }];
        }
        Vec::new()
    }

    fn on_deliver(&mut self, src: Endpoint, msg: ReplMsg) {
        self.inq.entry(src).or_default().push(msg);
    }

    fn handle(&mut self, src: Endpoint, msg: ReplMsg) {
        match msg {
            ReplMsg::Req { client, op } => {
                let mut proposed = self.log.clone();
                proposed.push(op);
                let mut backups = self.believed.clone();
                backups.remove(&self.id);
                for q in &backups {
                    self.outq.push((
                        Endpoint::Server(*q),
                        ReplMsg::Sync {
                            log: proposed.clone(),
                        },
                    ));
                }
                self.pend = Some(Pending {
                    client: Some(client),
                    op: Some(op),
                    proposed,
                    awaiting: backups,
                });
                self.try_commit();
            }
            ReplMsg::Sync { log } => {
                if log.starts_with(&self.log) {
                    self.log = log.clone();
                    self.outq.push((src, ReplMsg::Ack { log }));
                }
            }
            ReplMsg::Ack { log } => {
                if let (Some(pend), Endpoint::Server(q)) = (&mut self.pend, src) {
                    if pend.proposed == log {
                        pend.awaiting.remove(&q);
                    }
                }
                self.try_commit();
            }
            ReplMsg::Reply { .. } => {}
        }
    }

    fn try_commit(&mut self) {
        let Some(pend) = self.pend.clone() else {
            return;
        };
        if pend.awaiting.intersection(&self.believed).next().is_some() {
            return;
        }
        self.log = pend.proposed.clone();
        self.pend = None;
        if let (Some(c), Some(op)) = (pend.client, pend.op) {
            self.outq.push((Endpoint::Client(c), ReplMsg::Reply { op }));
        }
    }

    fn on_detect(&mut self, dead: u32) {
        self.believed.remove(&dead);
        if self.is_primary() && self.pend.is_none() && dead < self.id {
            // Fresh primary: re-synchronize the survivors on the own log
            // before accepting new work.
            let mut backups = self.believed.clone();
            backups.remove(&self.id);
            for q in &backups {
                self.outq.push((
                    Endpoint::Server(*q),
                    ReplMsg::Sync {
                        log: self.log.clone(),
                    },
                ));
            }
            self.pend = Some(Pending {
                client: None,
                op: None,
                proposed: self.log.clone(),
                awaiting: backups,
            });
        }
        self.try_commit();
    }
}

/// The client implementation: one outstanding request at a time, aimed at
/// whichever server it currently believes is primary.
struct ClientProgram {
    id: u32,
    remaining: Vec<i64>,
    outstanding: Option<(i64, u32)>,
    believed: BTreeSet<u32>,
    done: Vec<i64>,
}

impl ClientProgram {
    fn new(id: u32, n_servers: u32, ops: &[i64]) -> ClientProgram {
        ClientProgram {
            id,
            remaining: ops.to_vec(),
            outstanding: None,
            believed: (1..=n_servers).collect(),
            done: Vec::new(),
        }
    }

    fn wants_poll(&self) -> bool {
        self.outstanding.is_none() && !self.remaining.is_empty() && !self.believed.is_empty()
    }

    fn poll(&mut self) -> Vec<ReplReq> {
        if !self.wants_poll() {
            return Vec::new();
        }
        let p = *self.believed.first().unwrap();
        let op = self.remaining.remove(0);
        self.outstanding = Some((op, p));
        vec![ReplReq::Send {
            dst: Endpoint::Server(p),
            msg: ReplMsg::Req { client: self.id, op },
        }]
    }

    fn on_deliver(&mut self, src: Endpoint, msg: ReplMsg) {
        if let (Endpoint::Server(p), ReplMsg::Reply { op }) = (src, msg) {
            if self.outstanding == Some((op, p)) {
                self.outstanding = None;
                self.done.push(op);
            }
        }
    }

    fn on_detect(&mut self, dead: u32) {
        self.believed.remove(&dead);
        if let Some((op, p)) = self.outstanding {
            if p == dead {
                self.outstanding = None;
                self.remaining.push(op);
            }
        }
    }
}

enum Program {
    Server(ServerProgram),
    Client(ClientProgram),
}

impl Program {
    fn crashed(&self) -> bool {
        match self {
            Program::Server(s) => s.crashed,
            Program::Client(_) => false,
        }
    }

    fn wants_poll(&self) -> bool {
        match self {
            Program::Server(s) => s.wants_poll(),
            Program::Client(c) => c.wants_poll(),
        }
    }

    fn poll(&mut self) -> Vec<ReplReq> {
        match self {
            Program::Server(s) => s.poll(),
            Program::Client(c) => c.poll(),
        }
    }

    fn on_deliver(&mut self, src: Endpoint, msg: ReplMsg) {
        match self {
            Program::Server(s) => s.on_deliver(src, msg),
            Program::Client(c) => c.on_deliver(src, msg),
        }
    }

    fn on_detect(&mut self, dead: u32) {
        match self {
            Program::Server(s) => s.on_detect(dead),
            Program::Client(c) => c.on_detect(dead),
        }
    }
}

enum FaultEvent {
    Crash(Endpoint),
    Detect { observer: Endpoint, dead: u32 },
}

/// A finished run: the serializable outcome, the monitors for projection
/// checks, and any predicate breaches found while the run was live.
pub struct ReplRun {
    pub outcome: SimOutcome,
    pub monitors: BTreeMap<String, Monitor<ReplLocal>>,
    pub breaches: Vec<String>,
}

/// Re-assembles a whole-system state: node states from the monitors, the
/// crash record from the harness, and as channel contents everything in
/// flight in FIFO order, i.e. delivered-but-unprocessed input, the wire,
/// then queued-but-unsent output.
fn assemble(
    monitors: &BTreeMap<String, Monitor<ReplLocal>>,
    net: &BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>>,
    live_env: &BTreeSet<u32>,
) -> ReplState {
    let mut servers: BTreeMap<u32, ServerNode> = BTreeMap::new();
    let mut clients: BTreeMap<u32, ClientNode> = BTreeMap::new();
    let mut ibufs: BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>> = BTreeMap::new();
    let mut obufs: BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>> = BTreeMap::new();
    for (name, monitor) in monitors {
        let me = parse_endpoint(name).expect("monitor keys are endpoint names");
        match monitor.current_state() {
            ReplLocal::Server {
                node,
                id,
                ibuf,
                obuf,
            } => {
                servers.insert(*id, node.clone());
                for (src, queue) in ibuf {
                    ibufs.insert((*src, me), queue.clone());
                }
                for (dst, msg) in obuf {
                    obufs.entry((me, *dst)).or_default().push(msg.clone());
                }
            }
            ReplLocal::Client { node, id } => {
                clients.insert(*id, node.clone());
            }
        }
    }
    let mut chans: BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>> = BTreeMap::new();
    let pairs: BTreeSet<(Endpoint, Endpoint)> = ibufs
        .keys()
        .chain(net.keys())
        .chain(obufs.keys())
        .copied()
        .collect();
    for pair in pairs {
        let mut queue = ibufs.remove(&pair).unwrap_or_default();
        queue.extend(net.get(&pair).cloned().unwrap_or_default());
        queue.extend(obufs.remove(&pair).unwrap_or_default());
        if !queue.is_empty() {
            chans.insert(pair, queue);
        }
    }
    ReplState {
        servers,
        clients,
        live_env: live_env.clone(),
        chans,
    }
}

enum Choice {
    Poll(Endpoint),
    Deliver(Endpoint, Endpoint),
}

/// Runs the replication group over reliable FIFO channels with the given
/// fault plan. Identical arguments give an identical log; reusing one
/// stack across seeds also reuses its validated component models.
pub fn run_repl_sim(
    stack: &ReplStack,
    plan: &FaultPlan,
    seed: u64,
    max_steps: usize,
    mode: SimMode,
    backend: Backend,
) -> ReplRun {
    let (n_servers, ops) = (stack.n_servers, stack.ops.clone());
    let n_clients = stack.n_clients;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monitors: BTreeMap<String, Monitor<ReplLocal>> = BTreeMap::new();
    let mut programs: BTreeMap<Endpoint, Program> = BTreeMap::new();
    for (name, ges) in &stack.components {
        let monitor = monitor_new(ges, ges.initial(), ges.typing(), backend)
            .expect("component guards ignore inputs");
        monitors.insert(name.clone(), monitor);
        let ep = parse_endpoint(name).expect("component keys are endpoint names");
        let program = match ep {
            Endpoint::Server(p) => Program::Server(ServerProgram::new(p, n_servers)),
            Endpoint::Client(c) => Program::Client(ClientProgram::new(c, n_servers, &ops)),
        };
        programs.insert(ep, program);
    }

    // Draw the whole fault schedule up front: the crash itself, then one
    // detector notification per surviving endpoint within the bound.
    let mut fault_sched: BTreeMap<usize, Vec<FaultEvent>> = BTreeMap::new();
    for crash in &plan.crashes {
        let dead = parse_endpoint(&crash.node);
        let Some(Endpoint::Server(p)) = dead else {
            panic!("only servers crash in these runs: {:?}", crash.node);
        };
        fault_sched
            .entry(crash.at_step)
            .or_default()
            .push(FaultEvent::Crash(Endpoint::Server(p)));
        for observer in programs.keys().copied() {
            if observer == Endpoint::Server(p) {
                continue;
            }
            let delay = rng.gen_range(0..=plan.max_detect_delay);
            fault_sched
                .entry(crash.at_step + delay)
                .or_default()
                .push(FaultEvent::Detect { observer, dead: p });
        }
    }

    let mut net: BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>> = BTreeMap::new();
    let mut live_env: BTreeSet<u32> = (1..=n_servers).collect();
    let mut records: Vec<LogRecord> = Vec::new();
    let mut summary = SimSummary::default();
    let mut termination: Option<SimTermination> = None;
    let mut breaches: Vec<String> = Vec::new();

    let check = |step: usize,
                     monitors: &BTreeMap<String, Monitor<ReplLocal>>,
                     net: &BTreeMap<(Endpoint, Endpoint), Vec<ReplMsg>>,
                     live_env: &BTreeSet<u32>,
                     breaches: &mut Vec<String>| {
        let state = assemble(monitors, net, live_env);
        if !stack.consistency.test(&state) {
            breaches.push(format!("step {step}: {}", stack.consistency.name()));
        }
        if !stack.liveness_record.test(&state) {
            breaches.push(format!("step {step}: {}", stack.liveness_record.name()));
        }
    };
    check(0, &monitors, &net, &live_env, &mut breaches);

    'steps: for step in 0..max_steps {
        for fault in fault_sched.remove(&step).unwrap_or_default() {
            match fault {
                FaultEvent::Crash(ep) => {
                    let name = endpoint_name(ep);
                    let program = programs.get_mut(&ep).unwrap();
                    if program.crashed() {
                        continue;
                    }
                    let verdict =
                        monitors.get_mut(&name).unwrap().commit("crash", &Value::Unit, &Value::Unit);
                    records.push(LogRecord {
                        step,
                        node: name.clone(),
                        kind: RecordKind::Action {
                            bio: "crash".into(),
                            out: Value::Unit,
                            input: Value::Unit,
                            ghost: false,
                            verdict: verdict.code().into(),
                        },
                    });
                    records.push(LogRecord {
                        step,
                        node: name.clone(),
                        kind: RecordKind::Fault {
                            what: "crash".into(),
                        },
                    });
                    if let Program::Server(s) = program {
                        s.crashed = true;
                        live_env.remove(&s.id);
                    }
                    if !verdict.is_permit() {
                        summary.violations += 1;
                        if matches!(mode, SimMode::Strict) {
                            termination = Some(SimTermination::MonitorViolation {
                                node: name,
                                bio: "crash".into(),
                                out: Value::Unit,
                                at_step: step,
                            });
                            break 'steps;
                        }
                    }
                }
                FaultEvent::Detect { observer, dead } => {
                    if programs[&observer].crashed() {
                        continue;
                    }
                    let name = endpoint_name(observer);
                    let out = Value::Int(dead as i64);
                    let verdict =
                        monitors.get_mut(&name).unwrap().commit("detect", &out, &Value::Unit);
                    records.push(LogRecord {
                        step,
                        node: name.clone(),
                        kind: RecordKind::Action {
                            bio: "detect".into(),
                            out: out.clone(),
                            input: Value::Unit,
                            ghost: false,
                            verdict: verdict.code().into(),
                        },
                    });
                    programs.get_mut(&observer).unwrap().on_detect(dead);
                    if !verdict.is_permit() {
                        summary.violations += 1;
                        if matches!(mode, SimMode::Strict) {
                            termination = Some(SimTermination::MonitorViolation {
                                node: name,
                                bio: "detect".into(),
                                out,
                                at_step: step,
                            });
                            break 'steps;
                        }
                    }
                }
            }
        }

        let mut choices: Vec<Choice> = Vec::new();
        for (ep, program) in &programs {
            if program.wants_poll() {
                choices.push(Choice::Poll(*ep));
            }
        }
        for ((from, to), queue) in &net {
            if !queue.is_empty() && !programs[to].crashed() {
                choices.push(Choice::Deliver(*from, *to));
            }
        }
        if choices.is_empty() {
            if fault_sched.is_empty() {
                termination = Some(SimTermination::Quiescent);
                summary.steps = step;
                break;
            }
            // Idle until the next scheduled fault.
            summary.steps = step + 1;
            check(step, &monitors, &net, &live_env, &mut breaches);
            continue;
        }
        summary.steps = step + 1;

        match choices[rng.gen_range(0..choices.len())] {
            Choice::Poll(ep) => {
                let name = endpoint_name(ep);
                for req in programs.get_mut(&ep).unwrap().poll() {
                    let (bio, out, ghost) = match &req {
                        ReplReq::Send { dst, msg } => (
                            "send",
                            Value::pair(dst.to_value(), msg.to_value()),
                            false,
                        ),
                        ReplReq::Proc { src } => ("proc", src.to_value(), true),
                    };
                    let mon = monitors.get_mut(&name).unwrap();
                    let verdict = if ghost {
                        mon.commit_ghost(bio, &out, &Value::Unit)
                    } else {
                        let phase1 = mon.request_output(bio, &out);
                        if phase1.is_permit() {
                            mon.commit(bio, &out, &Value::Unit)
                        } else {
                            phase1
                        }
                    };
                    records.push(LogRecord {
                        step,
                        node: name.clone(),
                        kind: RecordKind::Action {
                            bio: bio.into(),
                            out: out.clone(),
                            input: Value::Unit,
                            ghost,
                            verdict: verdict.code().into(),
                        },
                    });
                    if !verdict.is_permit() {
                        summary.violations += 1;
                        if matches!(mode, SimMode::Strict) {
                            termination = Some(SimTermination::MonitorViolation {
                                node: name,
                                bio: bio.into(),
                                out,
                                at_step: step,
                            });
                            break 'steps;
                        }
                    }
                    if let ReplReq::Send { dst, msg } = req {
                        net.entry((ep, dst)).or_default().push(msg.clone());
                        records.push(LogRecord {
                            step,
                            node: endpoint_name(ep),
                            kind: RecordKind::Send {
                                chan: chan_name(ep, dst),
                                msg: msg.to_value(),
                            },
                        });
                    }
                }
            }
            Choice::Deliver(from, to) => {
                let queue = net.get_mut(&(from, to)).unwrap();
                let msg = queue.remove(0);
                if queue.is_empty() {
                    net.remove(&(from, to));
                }
                let name = endpoint_name(to);
                records.push(LogRecord {
                    step,
                    node: name.clone(),
                    kind: RecordKind::Deliver {
                        chan: chan_name(from, to),
                        msg: msg.to_value(),
                    },
                });
                let verdict = monitors.get_mut(&name).unwrap().commit(
                    "recv",
                    &from.to_value(),
                    &msg.to_value(),
                );
                records.push(LogRecord {
                    step,
                    node: name.clone(),
                    kind: RecordKind::Action {
                        bio: "recv".into(),
                        out: from.to_value(),
                        input: msg.to_value(),
                        ghost: false,
                        verdict: verdict.code().into(),
                    },
                });
                if verdict.is_permit() {
                    if matches!((to, &msg), (Endpoint::Client(_), ReplMsg::Reply { .. })) {
                        summary.replies += 1;
                    }
                } else {
                    summary.violations += 1;
                    if matches!(mode, SimMode::Strict) {
                        termination = Some(SimTermination::MonitorViolation {
                            node: name,
                            bio: "recv".into(),
                            out: from.to_value(),
                            at_step: step,
                        });
                        break 'steps;
                    }
                }
                programs.get_mut(&to).unwrap().on_deliver(from, msg);
            }
        }
        check(step, &monitors, &net, &live_env, &mut breaches);
    }

    let termination = termination.unwrap_or(SimTermination::StepLimit);
    ReplRun {
        outcome: SimOutcome {
            log: TraceLog {
                scenario: format!("repl-{n_servers}s-{n_clients}c"),
                channel: ChannelModel::ReliableFifo,
                seed,
                records,
            },
            summary,
            termination,
        },
        monitors,
        breaches,
    }
}

/// The committed log of each server at the end of a run, keyed by id.
pub fn final_server_logs(run: &ReplRun) -> BTreeMap<u32, Vec<i64>> {
    run.monitors
        .values()
        .filter_map(|m| match m.current_state() {
            ReplLocal::Server { node, id, .. } => Some((*id, node.log.clone())),
            ReplLocal::Client { .. } => None,
        })
        .collect()
}

/// What each client got done by the end of a run, keyed by id.
pub fn final_client_done(run: &ReplRun) -> BTreeMap<u32, Vec<i64>> {
    run.monitors
        .values()
        .filter_map(|m| match m.current_state() {
            ReplLocal::Client { node, id } => Some((*id, node.done.clone())),
            ReplLocal::Server { .. } => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::repl::{build_repl_stack, ordered_wrt_prefix};
    use crate::simnet::check_no_fabrication;

    #[test]
    fn a_faultless_run_quiesces_with_the_reply() {
        let stack = build_repl_stack(2, 1, &[7]);
        let run = run_repl_sim(
            &stack,
            &FaultPlan::none(),
            3,
            300,
            SimMode::Strict,
            Backend::EsGuard,
        );
        assert_eq!(run.outcome.termination, SimTermination::Quiescent);
        assert_eq!(run.outcome.summary.violations, 0);
        assert_eq!(run.outcome.summary.replies, 1);
        assert!(run.breaches.is_empty(), "{:?}", run.breaches);
        assert_eq!(final_client_done(&run)[&1], vec![7]);
        let logs = final_server_logs(&run);
        assert!(logs.values().all(|log| log == &vec![7]));
        assert!(check_no_fabrication(&run.outcome.log).is_ok());
    }

    #[test]
    fn same_seed_gives_the_same_log() {
        let stack = build_repl_stack(3, 1, &[4]);
        let plan = FaultPlan::crash("srv:1", 2);
        let go = |seed| {
            run_repl_sim(&stack, &plan, seed, 400, SimMode::Strict, Backend::EsGuard).outcome
        };
        assert_eq!(go(11), go(11));
        assert_ne!(go(11).log, go(12).log);
    }

    #[test]
    fn a_primary_crash_hands_over_without_breaching_anything() {
        let stack = build_repl_stack(3, 1, &[4]);
        let plan = FaultPlan::crash("srv:1", 2);
        for seed in [0, 1, 2, 3, 4] {
            let run = run_repl_sim(&stack, &plan, seed, 500, SimMode::Strict, Backend::EsGuard);
            assert_eq!(run.outcome.summary.violations, 0, "seed {seed}");
            assert!(run.breaches.is_empty(), "seed {seed}: {:?}", run.breaches);
            assert_eq!(run.outcome.termination, SimTermination::Quiescent, "seed {seed}");
            assert_eq!(run.outcome.summary.replies, 1, "seed {seed}");
            assert_eq!(final_client_done(&run)[&1], vec![4], "seed {seed}");
            // The survivors agree on the committed log.
            let logs = final_server_logs(&run);
            assert!(
                ordered_wrt_prefix(&[logs[&2].clone(), logs[&3].clone()])
                    && ordered_wrt_prefix(&[logs[&3].clone(), logs[&2].clone()]),
                "seed {seed}: {:?}",
                logs
            );
            assert!(check_no_fabrication(&run.outcome.log).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn the_log_projects_to_each_monitors_observations() {
        let stack = build_repl_stack(3, 1, &[4]);
        let plan = FaultPlan::crash("srv:1", 4);
        let run = run_repl_sim(&stack, &plan, 7, 500, SimMode::Strict, Backend::EsGuard);
        for (name, monitor) in &run.monitors {
            let projected: Vec<_> = run
                .outcome
                .log
                .node_actions(name)
                .into_iter()
                .map(|(b, o, i, _)| (b, o, i))
                .collect();
            let observed: Vec<_> = monitor
                .observed_actions(true)
                .into_iter()
                .map(|a| (a.bio, a.output, a.input))
                .collect();
            assert_eq!(projected, observed, "node {name}");
        }
    }

    #[test]
    fn tampered_fifo_logs_are_caught() {
        let stack = build_repl_stack(2, 1, &[7]);
        let run = run_repl_sim(
            &stack,
            &FaultPlan::none(),
            3,
            300,
            SimMode::Strict,
            Backend::EsGuard,
        );
        let mut log = run.outcome.log;
        let pos = log
            .records
            .iter()
            .position(|r| matches!(r.kind, RecordKind::Deliver { .. }))
            .expect("something was delivered");
        let RecordKind::Deliver { msg, .. } = &mut log.records[pos].kind else {
            unreachable!()
        };
        *msg = ReplMsg::Reply { op: 999 }.to_value();
        assert_eq!(check_no_fabrication(&log), Err(pos));
    }
}
