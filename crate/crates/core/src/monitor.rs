//! Runtime monitoring of component I/O against a component model.
//!
//! A monitor intercepts each I/O call in two phases: `request_output`
//! checks, before the call happens, that the component is allowed to issue
//! the operation with the given output data; `commit` records the call
//! once its input is known, advancing the monitor state. Two backends
//! implement the same decisions independently and are cross-checked: one
//! evaluates the model's guards directly, the other pushes a token through
//! the heap of I/O permissions carved out by the model's process
//! translation, unfolded lazily one level at a time.

use crate::hashing::fnv1a64;
use crate::iosl::heap::{heap_step, Chunk, Dir, Heap, HeapState, Place};
use crate::process::guarded::{proc_of_ges_unchecked, GuardedError, IoGuardedEs};
use crate::process::typing::{Action, Typing};
use crate::process::Process;
use crate::value::Value;
use crate::{Event, Trace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Debug;

/// How far guard/input independence is explored at construction. Guards
/// are also only ever evaluated with typed inputs afterwards, so a
/// violation beyond this horizon cannot corrupt verdicts silently; the
/// bounded check is a loud early failure for the common case. Two levels
/// keep it cheap even for nodes whose input alphabet is large.
pub const GUARD_CHECK_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Evaluate the model's guards at the current state.
    EsGuard,
    /// Push a token through the lazily unfolded permission heap.
    HeapToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DenyReason {
    /// No guard (equivalently, no permission) enables this operation and
    /// output here. The two backends name this differently.
    NoEnabledGuard,
    NoPermissionAtToken,
    /// The operation is enabled but the input lies outside its type.
    IllTypedInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Permit,
    Deny(DenyReason),
}

impl Verdict {
    pub fn is_permit(&self) -> bool {
        matches!(self, Verdict::Permit)
    }

    /// Backend-independent verdict class: the enabledness deny reasons are
    /// two names for the same decision.
    pub fn class(&self) -> &'static str {
        match self {
            Verdict::Permit => "permit",
            Verdict::Deny(DenyReason::IllTypedInput) => "deny-ill-typed",
            Verdict::Deny(_) => "deny-not-enabled",
        }
    }

    pub fn agrees_with(&self, other: &Verdict) -> bool {
        self.class() == other.class()
    }

    pub fn code(&self) -> &'static str {
        match self {
            Verdict::Permit => "PERMIT",
            Verdict::Deny(DenyReason::NoEnabledGuard) => "DENY:no-enabled-guard",
            Verdict::Deny(DenyReason::NoPermissionAtToken) => "DENY:no-permission-at-token",
            Verdict::Deny(DenyReason::IllTypedInput) => "DENY:ill-typed-input",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One line of the monitor's event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// "request", "commit", or "ghost".
    pub kind: String,
    pub bio: String,
    pub out: Value,
    #[serde(rename = "in")]
    pub input: Option<Value>,
    pub verdict: String,
    pub state_hash: u64,
}

enum BackendState {
    EsGuard,
    HeapToken { residual: Process, token: Place },
}

pub struct Monitor<S> {
    model: IoGuardedEs<S>,
    current: S,
    backend: BackendState,
    /// Committed actions with their ghost flags.
    observed: Vec<(Action, bool)>,
    /// Digest of `observed`, folded one action at a time so long histories
    /// stay cheap to hash.
    observed_hash: u64,
    log: Vec<LogEntry>,
}

/// Builds a monitor for a component model at state `s0`.
///
/// `typing` must be the model's own typing; it is part of the signature so
/// call sites state explicitly which typing governs input checks. Fails if
/// some guard within [`GUARD_CHECK_DEPTH`] steps depends on its input.
pub fn monitor_new<S: Ord + Clone + Debug + 'static>(
    ges: &IoGuardedEs<S>,
    s0: &S,
    typing: &Typing,
    backend: Backend,
) -> Result<Monitor<S>, GuardedError> {
    assert_eq!(typing, ges.typing(), "monitor typing must match the model");
    ges.check_guard_independence(GUARD_CHECK_DEPTH)?;
    let backend = match backend {
        Backend::EsGuard => BackendState::EsGuard,
        Backend::HeapToken => BackendState::HeapToken {
            residual: proc_of_ges_unchecked(ges, s0),
            token: Place::root(),
        },
    };
    Ok(Monitor {
        model: ges.clone(),
        current: s0.clone(),
        backend,
        observed: Vec::new(),
        observed_hash: fnv1a64(b""),
        log: Vec::new(),
    })
}

/// The top-level pending prefixes of a process: each reachable through
/// choices only, together with its choice path.
fn toplevel_prefixes(p: &Process) -> Vec<(Vec<Dir>, String, Value, std::rc::Rc<dyn Fn(&Value) -> Process>)> {
    fn walk(
        p: &Process,
        path: &mut Vec<Dir>,
        out: &mut Vec<(Vec<Dir>, String, Value, std::rc::Rc<dyn Fn(&Value) -> Process>)>,
    ) {
        match p {
            Process::Inactive => {}
            Process::Prefix { bio, output, cont } => {
                out.push((path.clone(), bio.clone(), output.clone(), cont.clone()));
            }
            Process::Choice(lhs, rhs) => {
                path.push(Dir::L);
                walk(lhs, path, out);
                path.pop();
                path.push(Dir::R);
                walk(rhs, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(p, &mut Vec::new(), &mut out);
    out
}

impl<S: Ord + Clone + Debug + 'static> Monitor<S> {
    pub fn backend(&self) -> Backend {
        match self.backend {
            BackendState::EsGuard => Backend::EsGuard,
            BackendState::HeapToken { .. } => Backend::HeapToken,
        }
    }

    pub fn current_state(&self) -> &S {
        &self.current
    }

    /// Stable digest of everything a DENY must leave untouched.
    pub fn state_hash(&self) -> u64 {
        let token = match &self.backend {
            BackendState::EsGuard => None,
            BackendState::HeapToken { token, .. } => Some(token.clone()),
        };
        fnv1a64(format!("{:?}|{:?}|{}", self.current, token, self.observed_hash).as_bytes())
    }

    /// The (bio, output) pairs a request would PERMIT right now.
    pub fn enabled_outputs(&self) -> BTreeSet<(String, Value)> {
        match &self.backend {
            BackendState::EsGuard => {
                let mut out = BTreeSet::new();
                for ev in self.model.events() {
                    for v in &ev.outputs {
                        let probe = self
                            .model
                            .typing()
                            .pick(&ev.bio, v)
                            .expect("validated at construction");
                        if (ev.guard)(&self.current, v, &probe) {
                            out.insert((ev.bio.clone(), v.clone()));
                        }
                    }
                }
                out
            }
            BackendState::HeapToken { residual, .. } => toplevel_prefixes(residual)
                .into_iter()
                .map(|(_, bio, v, _)| (bio, v))
                .collect(),
        }
    }

    /// Phase one: may the component issue `bio` with output `v`? Logged,
    /// but never changes the verdict-relevant state.
    pub fn request_output(&mut self, bio: &str, v: &Value) -> Verdict {
        let verdict = match &self.backend {
            BackendState::EsGuard => {
                if self.guard_holds(bio, v) {
                    Verdict::Permit
                } else {
                    Verdict::Deny(DenyReason::NoEnabledGuard)
                }
            }
            BackendState::HeapToken { residual, .. } => {
                let found = toplevel_prefixes(residual)
                    .iter()
                    .any(|(_, b, o, _)| b == bio && o == v);
                if found {
                    Verdict::Permit
                } else {
                    Verdict::Deny(DenyReason::NoPermissionAtToken)
                }
            }
        };
        self.push_log("request", bio, v, None, verdict);
        verdict
    }

    /// Phase two for regular events: record the completed call with its
    /// input `w`, advancing the state on PERMIT.
    pub fn commit(&mut self, bio: &str, v: &Value, w: &Value) -> Verdict {
        self.commit_kind(bio, v, w, false)
    }

    /// Phase two for ghost events (internal steps modeled as I/O).
    pub fn commit_ghost(&mut self, bio: &str, v: &Value, w: &Value) -> Verdict {
        self.commit_kind(bio, v, w, true)
    }

    /// The committed actions in order; ghosts dropped unless asked for.
    pub fn observed_actions(&self, include_ghost: bool) -> Vec<Action> {
        self.observed
            .iter()
            .filter(|(_, ghost)| include_ghost || !ghost)
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// [`Self::observed_actions`] as an event trace.
    pub fn observed_trace(&self, include_ghost: bool) -> Trace {
        self.observed_actions(include_ghost)
            .iter()
            .map(Action::to_event)
            .collect::<Vec<Event>>()
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// The log as JSON lines.
    pub fn log_lines(&self) -> Vec<String> {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entries serialize"))
            .collect()
    }

    fn guard_holds(&self, bio: &str, v: &Value) -> bool {
        let Some(ev) = self.model.event(bio) else {
            return false;
        };
        if !ev.outputs.contains(v) {
            return false;
        }
        // Guards ignore their input argument; probe with the least one.
        let probe = self
            .model
            .typing()
            .pick(bio, v)
            .expect("validated at construction");
        (ev.guard)(&self.current, v, &probe)
    }

    fn commit_kind(&mut self, bio: &str, v: &Value, w: &Value, ghost: bool) -> Verdict {
        let kind = if ghost { "ghost" } else { "commit" };
        let verdict = self.decide_commit(bio, v, w, ghost);
        if verdict.is_permit() {
            self.apply_commit(bio, v, w, ghost);
        }
        self.push_log(kind, bio, v, Some(w.clone()), verdict);
        verdict
    }

    fn decide_commit(&self, bio: &str, v: &Value, w: &Value, ghost: bool) -> Verdict {
        let not_enabled = match self.backend {
            BackendState::EsGuard => Verdict::Deny(DenyReason::NoEnabledGuard),
            BackendState::HeapToken { .. } => Verdict::Deny(DenyReason::NoPermissionAtToken),
        };
        // Committing a ghost event through the non-ghost entry point (or
        // vice versa) is a call-shape error, reported as not enabled.
        match self.model.event(bio) {
            Some(ev) if ev.ghost != ghost => return not_enabled,
            _ => {}
        }
        let enabled = match &self.backend {
            BackendState::EsGuard => self.guard_holds(bio, v),
            BackendState::HeapToken { residual, .. } => toplevel_prefixes(residual)
                .iter()
                .any(|(_, b, o, _)| b == bio && o == v),
        };
        if !enabled {
            return not_enabled;
        }
        let well_typed = self
            .model
            .typing()
            .inputs(bio, v)
            .is_some_and(|ws| ws.contains(w));
        if !well_typed {
            return Verdict::Deny(DenyReason::IllTypedInput);
        }
        Verdict::Permit
    }

    fn apply_commit(&mut self, bio: &str, v: &Value, w: &Value, ghost: bool) {
        if let BackendState::HeapToken { residual, token } = &mut self.backend {
            // Materialize one level of the permission heap: the token plus
            // one permission per pending prefix, anchored at the token's
            // place, targets laid out along the choice paths. The committed
            // prefix predicts the observed input (the schedule is extended
            // with it); the others predict their least input and stay dead.
            let prefixes = toplevel_prefixes(residual);
            let mut heap = Heap::from_chunks([Chunk::token(token.clone())]);
            let mut fired: Option<(Place, Process)> = None;
            for (path, b, o, cont) in &prefixes {
                let target = path
                    .iter()
                    .fold(token.clone(), |p, d| p.child(*d))
                    .child(Dir::L);
                let input = if b == bio && o == v {
                    fired = Some((target.clone(), cont(w)));
                    w.clone()
                } else {
                    self.model
                        .typing()
                        .pick(b, o)
                        .expect("validated at construction")
                };
                heap.insert(Chunk::perm(b.clone(), token.clone(), o.clone(), input, target));
            }
            let (new_token, next) = fired.expect("decide_commit found the prefix");
            let action = Action::new(bio, v.clone(), w.clone());
            let successors = heap_step(&HeapState::Live(heap), &action, self.model.typing());
            // Exactly one permission instance fires and it pushes the token
            // to the fired target without chaos; anything else means the
            // two backends have diverged.
            let live_tokens: BTreeSet<Option<Place>> = successors
                .iter()
                .map(|hs| match hs {
                    HeapState::Live(h) => h
                        .distinct_chunks()
                        .find_map(|c| match c {
                            Chunk::Token { at } => Some(at.clone()),
                            _ => None,
                        }),
                    HeapState::Chaos => None,
                })
                .collect();
            debug_assert_eq!(successors.len(), 1, "one permission instance fires");
            assert_eq!(
                live_tokens,
                BTreeSet::from([Some(new_token.clone())]),
                "permitted commit must push the token without chaos"
            );
            *token = new_token;
            *residual = next;
        }
        let ev = self.model.event(bio).expect("decide_commit found the event");
        self.current = (ev.update)(&self.current, v, w);
        let entry = (Action::new(bio, v.clone(), w.clone()), ghost);
        self.observed_hash =
            fnv1a64(format!("{}|{:?}", self.observed_hash, entry).as_bytes());
        self.observed.push(entry);
    }

    fn push_log(&mut self, kind: &str, bio: &str, v: &Value, input: Option<Value>, verdict: Verdict) {
        let entry = LogEntry {
            seq: self.log.len() as u64,
            kind: kind.to_string(),
            bio: bio.to_string(),
            out: v.clone(),
            input,
            verdict: verdict.code().to_string(),
            state_hash: self.state_hash(),
        };
        self.log.push(entry);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::guarded::IoEvent;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::rc::Rc;

    fn v(n: i64) -> Value {
        Value::Int(n)
    }

    /// A small accumulator: `add` always accepts an increment from the
    /// environment, `emit` is enabled only for the current total, and the
    /// ghost `mark` fires once the total is positive.
    fn accumulator() -> IoGuardedEs<i64> {
        let mut ty = Typing::new();
        ty.add("add", Value::Unit, [v(1), v(2)]);
        for total in 0..=6 {
            ty.add_signal("emit", v(total));
        }
        ty.add_signal("mark", Value::Unit);
        let events = vec![
            IoEvent {
                bio: "add".into(),
                outputs: vec![Value::Unit],
                ghost: false,
                guard: Rc::new(|s: &i64, _, _| *s < 5),
                update: Rc::new(|s: &i64, _, w: &Value| s + w.as_int().unwrap()),
                render: None,
            },
            IoEvent {
                bio: "emit".into(),
                outputs: (0..=6).map(v).collect(),
                ghost: false,
                guard: Rc::new(|s: &i64, out: &Value, _| out.as_int() == Some(*s)),
                update: Rc::new(|s: &i64, _, _| *s),
                render: None,
            },
            IoEvent {
                bio: "mark".into(),
                outputs: vec![Value::Unit],
                ghost: true,
                guard: Rc::new(|s: &i64, _, _| *s > 0),
                update: Rc::new(|s: &i64, _, _| *s),
                render: None,
            },
        ];
        IoGuardedEs::new(0, ty, events).unwrap()
    }

    fn pair() -> (Monitor<i64>, Monitor<i64>) {
        let ges = accumulator();
        let ty = ges.typing().clone();
        let es = monitor_new(&ges, &0, &ty, Backend::EsGuard).unwrap();
        let heap = monitor_new(&ges, &0, &ty, Backend::HeapToken).unwrap();
        (es, heap)
    }

    #[test]
    fn verdict_matrix_on_both_backends() {
        let (mut es, mut heap) = pair();
        for m in [&mut es, &mut heap] {
            assert!(m.request_output("add", &Value::Unit).is_permit());
            assert!(m.request_output("emit", &v(0)).is_permit());
            // emit(3) is guarded by total == 3, not yet true.
            assert!(!m.request_output("emit", &v(3)).is_permit());
            // Unknown operation and out-of-domain output.
            assert!(!m.request_output("halt", &Value::Unit).is_permit());
            assert!(!m.request_output("emit", &v(99)).is_permit());
            // Enabled but ill-typed input.
            assert_eq!(
                m.commit("add", &Value::Unit, &v(7)),
                Verdict::Deny(DenyReason::IllTypedInput)
            );
            // The full permitted cycle.
            assert!(m.commit("add", &Value::Unit, &v(2)).is_permit());
            assert!(m.commit("emit", &v(2), &Value::Unit).is_permit());
            assert!(m.commit_ghost("mark", &Value::Unit, &Value::Unit).is_permit());
        }
        // Backend-specific names for the enabledness deny.
        assert_eq!(
            es.commit("emit", &v(5), &Value::Unit),
            Verdict::Deny(DenyReason::NoEnabledGuard)
        );
        assert_eq!(
            heap.commit("emit", &v(5), &Value::Unit),
            Verdict::Deny(DenyReason::NoPermissionAtToken)
        );
        assert!(es
            .commit("emit", &v(5), &Value::Unit)
            .agrees_with(&heap.commit("emit", &v(5), &Value::Unit)));
    }

    #[test]
    fn deny_leaves_no_trace_of_itself() {
        let (es, heap) = pair();
        for mut m in [es, heap] {
            assert!(m.commit("add", &Value::Unit, &v(1)).is_permit());
            let hash = m.state_hash();
            let enabled = m.enabled_outputs();
            assert!(!m.commit("emit", &v(4), &Value::Unit).is_permit());
            assert!(!m.commit("add", &Value::Unit, &v(9)).is_permit());
            assert!(!m.request_output("halt", &Value::Unit).is_permit());
            assert_eq!(m.state_hash(), hash);
            assert_eq!(m.enabled_outputs(), enabled);
            assert_eq!(m.observed_actions(true).len(), 1);
            // Repeating a denied call gives the identical verdict.
            assert_eq!(
                m.commit("emit", &v(4), &Value::Unit),
                m.commit("emit", &v(4), &Value::Unit)
            );
        }
    }

    #[test]
    fn ghost_actions_are_tracked_and_filtered() {
        let (_, mut m) = pair();
        assert!(m.commit("add", &Value::Unit, &v(1)).is_permit());
        assert!(m.commit_ghost("mark", &Value::Unit, &Value::Unit).is_permit());
        assert!(m.commit("emit", &v(1), &Value::Unit).is_permit());
        assert_eq!(m.observed_actions(true).len(), 3);
        let external = m.observed_actions(false);
        assert_eq!(external.len(), 2);
        assert!(external.iter().all(|a| a.bio != "mark"));
        // Ghosts must go through commit_ghost and vice versa.
        assert!(!m.commit("mark", &Value::Unit, &Value::Unit).is_permit());
        assert!(!m.commit_ghost("add", &Value::Unit, &v(1)).is_permit());
        // The event trace renders actions as events.
        let trace = m.observed_trace(true);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[1].name, "mark");
    }

    #[test]
    fn log_is_json_lines_with_increasing_seq() {
        let (mut m, _) = pair();
        m.request_output("add", &Value::Unit);
        m.commit("add", &Value::Unit, &v(2));
        m.commit("add", &Value::Unit, &v(9));
        m.commit_ghost("mark", &Value::Unit, &Value::Unit);
        let lines = m.log_lines();
        assert_eq!(lines.len(), 4);
        for (k, line) in lines.iter().enumerate() {
            let parsed: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(parsed["seq"], k as u64);
            assert!(parsed.get("bio").is_some());
            assert!(parsed.get("verdict").is_some());
            assert!(parsed.get("state_hash").is_some());
        }
        let parsed: Vec<LogEntry> = lines
            .iter()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed[0].kind, "request");
        assert_eq!(parsed[0].input, None);
        assert_eq!(parsed[1].kind, "commit");
        assert_eq!(parsed[1].verdict, "PERMIT");
        assert_eq!(parsed[2].verdict, "DENY:ill-typed-input");
        assert_eq!(parsed[3].kind, "ghost");
    }

    #[test]
    fn backends_agree_along_a_random_walk() {
        let ges = accumulator();
        let ty = ges.typing().clone();
        let mut es = monitor_new(&ges, &0, &ty, Backend::EsGuard).unwrap();
        let mut heap = monitor_new(&ges, &0, &ty, Backend::HeapToken).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut actions = ty.actions();
        // Some deliberately malformed calls keep the deny paths busy.
        actions.push(Action::new("add", Value::Unit, v(42)));
        actions.push(Action::new("halt", Value::Unit, Value::Unit));
        actions.push(Action::new("emit", v(99), Value::Unit));
        let mut permits = 0;
        for _ in 0..400 {
            assert_eq!(es.enabled_outputs(), heap.enabled_outputs());
            let a = actions.choose(&mut rng).unwrap().clone();
            let ghost = ges.event(&a.bio).map(|e| e.ghost).unwrap_or(false);
            assert!(es
                .request_output(&a.bio, &a.output)
                .agrees_with(&heap.request_output(&a.bio, &a.output)));
            let (ve, vh) = if ghost {
                (
                    es.commit_ghost(&a.bio, &a.output, &a.input),
                    heap.commit_ghost(&a.bio, &a.output, &a.input),
                )
            } else {
                (
                    es.commit(&a.bio, &a.output, &a.input),
                    heap.commit(&a.bio, &a.output, &a.input),
                )
            };
            assert!(ve.agrees_with(&vh), "{a}: {ve} vs {vh}");
            if ve.is_permit() {
                permits += 1;
                assert_eq!(es.observed_actions(true), heap.observed_actions(true));
            }
        }
        assert!(permits > 20, "walk exercised too few permits: {permits}");
    }

    #[test]
    fn construction_rejects_input_dependent_guards() {
        let mut ty = Typing::new();
        ty.add("read", Value::Unit, [v(0), v(1)]);
        let events = vec![IoEvent {
            bio: "read".into(),
            outputs: vec![Value::Unit],
            ghost: false,
            guard: Rc::new(|_: &i64, _, w: &Value| w.as_int() == Some(0)),
            update: Rc::new(|s: &i64, _, _| *s),
            render: None,
        }];
        let ges = IoGuardedEs::new(0, ty.clone(), events).unwrap();
        for backend in [Backend::EsGuard, Backend::HeapToken] {
            assert!(matches!(
                monitor_new(&ges, &0, &ty, backend),
                Err(GuardedError::GuardDependsOnInput { .. })
            ));
        }
    }

    #[test]
    fn empty_model_permits_nothing() {
        let ty = Typing::new();
        let ges: IoGuardedEs<i64> = IoGuardedEs::new(0, ty.clone(), Vec::new()).unwrap();
        for backend in [Backend::EsGuard, Backend::HeapToken] {
            let mut m = monitor_new(&ges, &0, &ty, backend).unwrap();
            assert!(m.enabled_outputs().is_empty());
            assert!(!m.request_output("anything", &Value::Unit).is_permit());
            assert!(m.observed_trace(true).is_empty());
        }
    }

    #[test]
    fn permitted_runs_replay_in_the_model() {
        let ges = accumulator();
        let ty = ges.typing().clone();
        for backend in [Backend::EsGuard, Backend::HeapToken] {
            let mut m = monitor_new(&ges, &0, &ty, backend).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut steps = 0;
            while steps < 5 {
                let enabled: Vec<(String, Value)> = m.enabled_outputs().into_iter().collect();
                let Some((bio, out)) = enabled.choose(&mut rng).cloned() else {
                    break;
                };
                let w = ty
                    .inputs(&bio, &out)
                    .unwrap()
                    .iter()
                    .cloned()
                    .collect::<Vec<_>>()
                    .choose(&mut rng)
                    .cloned()
                    .unwrap();
                let ghost = ges.event(&bio).unwrap().ghost;
                let verdict = if ghost {
                    m.commit_ghost(&bio, &out, &w)
                } else {
                    m.commit(&bio, &out, &w)
                };
                assert!(verdict.is_permit());
                steps += 1;
            }
            let run = m.observed_actions(true);
            assert!(ges.enumerate_io_traces(&0, run.len()).contains(&run));
        }
    }
}
