//! Guarded event systems over I/O actions.
//!
//! Each event family names one basic I/O operation with a finite output
//! candidate set, a guard, and an update. Guards may inspect the state and
//! the output but must be insensitive to the input (the input arrives only
//! when the operation returns); that independence is a proof obligation
//! checked on sampled states rather than a property of the representation.
//! Ghost families mark internal bookkeeping steps that monitors log but
//! real I/O never performs.

use crate::event::Event;
use crate::kernel::es::EventSystem;
use crate::process::proc::{finite_choice, Process};
use crate::process::typing::{Action, Typing};
use crate::value::Value;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuardedError {
    #[error("guard of {bio} depends on its input at state {state} (output {output})")]
    GuardDependsOnInput {
        bio: String,
        output: String,
        state: String,
    },
    #[error("duplicate event family {0}")]
    DuplicateFamily(String),
    #[error("event family {bio} has no typing entry for output {output}")]
    MissingTyping { bio: String, output: String },
}

/// Rendering hints for pretty-printing a family as one conjunct of the
/// component's I/O specification.
#[derive(Debug, Clone, Default)]
pub struct EventRender {
    /// Universally iterated binders over the output, e.g. `["m", "a′"]`.
    pub binders: Vec<String>,
    /// Guard text over state and binders; `None` renders as always-enabled.
    pub guard: Option<String>,
    /// Argument text inside the permission atom, e.g. `"m"` or `"(m, a′)"`.
    pub args: String,
    /// State change text, e.g. `"s[obuf := obuf(s) ∪ {m}]"` or `"s"`.
    pub update: String,
    /// I/O operation name in the atom; `None` renders the family name.
    pub op: Option<String>,
    /// Existentially bound input variable, listed before the fresh place.
    pub input: Option<String>,
}

#[derive(Clone)]
pub struct IoEvent<S> {
    pub bio: String,
    pub outputs: Vec<Value>,
    pub ghost: bool,
    pub guard: Rc<dyn Fn(&S, &Value, &Value) -> bool>,
    pub update: Rc<dyn Fn(&S, &Value, &Value) -> S>,
    pub render: Option<EventRender>,
}

/// A component model: finitely many I/O event families, a typing for
/// their actions, and one initial state.
#[derive(Clone)]
pub struct IoGuardedEs<S> {
    events: Vec<IoEvent<S>>,
    typing: Typing,
    initial: S,
    /// Guard-independence verdicts by checked depth, shared across clones
    /// so one model is only ever explored once per depth.
    independence: Rc<RefCell<BTreeMap<usize, Result<(), GuardedError>>>>,
}

impl<S: Ord + Clone + Debug + 'static> IoGuardedEs<S> {
    pub fn new(initial: S, typing: Typing, events: Vec<IoEvent<S>>) -> Result<Self, GuardedError> {
        let mut seen = BTreeSet::new();
        for ev in &events {
            if !seen.insert(ev.bio.clone()) {
                return Err(GuardedError::DuplicateFamily(ev.bio.clone()));
            }
            for v in &ev.outputs {
                if typing.inputs(&ev.bio, v).is_none() {
                    return Err(GuardedError::MissingTyping {
                        bio: ev.bio.clone(),
                        output: v.to_string(),
                    });
                }
            }
        }
        Ok(IoGuardedEs {
            events,
            typing,
            initial,
            independence: Rc::new(RefCell::new(BTreeMap::new())),
        })
    }

    pub fn typing(&self) -> &Typing {
        &self.typing
    }

    pub fn initial(&self) -> &S {
        &self.initial
    }

    pub fn events(&self) -> &[IoEvent<S>] {
        &self.events
    }

    pub fn event(&self, bio: &str) -> Option<&IoEvent<S>> {
        self.events.iter().find(|e| e.bio == bio)
    }

    /// Enabled actions at `s` with their ghost flags and targets, in
    /// canonical (bio, output, input) order. Guards are evaluated once per
    /// output with a representative input.
    pub fn action_successors(&self, s: &S) -> Vec<(Action, bool, S)> {
        let mut out = Vec::new();
        for ev in &self.events {
            let mut outputs = ev.outputs.clone();
            outputs.sort();
            for v in outputs {
                let inputs = self
                    .typing
                    .inputs(&ev.bio, &v)
                    .expect("validated at construction");
                let probe = inputs.iter().next().expect("non-empty type");
                if !(ev.guard)(s, &v, probe) {
                    continue;
                }
                for w in inputs {
                    out.push((
                        Action::new(ev.bio.clone(), v.clone(), w.clone()),
                        ev.ghost,
                        (ev.update)(s, &v, w),
                    ));
                }
            }
        }
        out
    }

    /// All action traces of length at most `depth` from `s`.
    pub fn enumerate_io_traces(&self, s: &S, depth: usize) -> BTreeSet<Vec<Action>> {
        let mut traces = BTreeSet::new();
        let mut pending = vec![(s.clone(), Vec::new())];
        while let Some((state, trace)) = pending.pop() {
            traces.insert(trace.clone());
            if trace.len() == depth {
                continue;
            }
            for (action, _, succ) in self.action_successors(&state) {
                let mut t = trace.clone();
                t.push(action);
                pending.push((succ, t));
            }
        }
        traces
    }

    /// Verifies guard/input independence on every state reachable within
    /// `depth` steps. The verdict is memoized per depth, so repeated checks
    /// of the same model (e.g. one monitor per deployed node) cost one
    /// exploration.
    pub fn check_guard_independence(&self, depth: usize) -> Result<(), GuardedError> {
        if let Some(verdict) = self.independence.borrow().get(&depth) {
            return verdict.clone();
        }
        let verdict = self.explore_independence(depth);
        self.independence.borrow_mut().insert(depth, verdict.clone());
        verdict
    }

    fn explore_independence(&self, depth: usize) -> Result<(), GuardedError> {
        let mut seen: BTreeSet<S> = BTreeSet::new();
        let mut frontier = vec![self.initial.clone()];
        seen.insert(self.initial.clone());
        for level in 0..=depth {
            let mut next = Vec::new();
            for s in &frontier {
                for ev in &self.events {
                    for v in &ev.outputs {
                        let inputs = self
                            .typing
                            .inputs(&ev.bio, v)
                            .expect("validated at construction");
                        let mut verdicts = inputs.iter().map(|w| (ev.guard)(s, v, w));
                        let first = verdicts.next().expect("non-empty type");
                        if verdicts.any(|g| g != first) {
                            return Err(GuardedError::GuardDependsOnInput {
                                bio: ev.bio.clone(),
                                output: v.to_string(),
                                state: format!("{s:?}"),
                            });
                        }
                    }
                }
                // States deeper than `depth` are never guard-checked, so
                // the last frontier need not be expanded at all.
                if level == depth {
                    continue;
                }
                for (_, _, succ) in self.action_successors(s) {
                    if seen.insert(succ.clone()) {
                        next.push(succ);
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        Ok(())
    }

    /// The induced plain event system (actions as events, stutter added).
    pub fn as_event_system(&self) -> EventSystem<S> {
        self.as_event_system_with(|action, _ghost| action.to_event())
    }

    /// Like [`Self::as_event_system`] but with a caller-chosen event
    /// encoding, used when components join a composition and their actions
    /// must carry the component identity.
    pub fn as_event_system_with(
        &self,
        encode: impl Fn(&Action, bool) -> Event + 'static,
    ) -> EventSystem<S> {
        let this = self.clone();
        EventSystem::new(vec![self.initial.clone()], move |s| {
            this.action_successors(s)
                .into_iter()
                .map(|(a, ghost, succ)| (encode(&a, ghost), succ))
                .collect()
        })
    }
}

/// Translates a guarded component into the process offering, at every
/// state, one prefix per enabled (bio, output) pair whose continuation
/// re-translates the updated state.
///
/// Guard/input independence is validated up to `check_depth` before the
/// lazy term is built.
pub fn proc_of_ges<S: Ord + Clone + Debug + 'static>(
    ges: &IoGuardedEs<S>,
    state: &S,
    check_depth: usize,
) -> Result<Process, GuardedError> {
    ges.check_guard_independence(check_depth)?;
    Ok(proc_unfold(Rc::new(ges.clone()), state.clone()))
}

/// [`proc_of_ges`] for callers that have already validated guard/input
/// independence.
pub fn proc_of_ges_unchecked<S: Ord + Clone + Debug + 'static>(
    ges: &IoGuardedEs<S>,
    state: &S,
) -> Process {
    proc_unfold(Rc::new(ges.clone()), state.clone())
}

fn proc_unfold<S: Ord + Clone + Debug + 'static>(ges: Rc<IoGuardedEs<S>>, state: S) -> Process {
    // Enabled (bio, output) pairs in canonical order.
    let mut enabled: Vec<(String, Value)> = Vec::new();
    for ev in ges.events() {
        for v in &ev.outputs {
            let probe = ges
                .typing()
                .pick(&ev.bio, v)
                .expect("validated at construction");
            if (ev.guard)(&state, v, &probe) {
                enabled.push((ev.bio.clone(), v.clone()));
            }
        }
    }
    enabled.sort();
    let branches: Vec<Value> = (0..enabled.len() as i64).map(Value::Int).collect();
    finite_choice(&branches, move |idx| {
        let k = idx.as_int().expect("branch index") as usize;
        let (bio, output) = enabled[k].clone();
        let ges = ges.clone();
        let state = state.clone();
        Process::prefix(bio.clone(), output.clone(), move |w| {
            let ev = ges.event(&bio).expect("family exists");
            let next = (ev.update)(&state, &output, w);
            proc_unfold(ges.clone(), next)
        })
    })
}
