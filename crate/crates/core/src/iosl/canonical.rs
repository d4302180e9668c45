//! Canonical heap models of processes.
//!
//! An input schedule fixes, for every point in an execution, which input
//! each operation would return next. Relative to a schedule, a process
//! unfolds into a single heap: each prefix contributes one permission
//! anchored at the position of the prefix in the process tree, and each
//! choice splits the position space. The family of these heaps over all
//! well-typed schedules characterizes the process's traces exactly, which
//! `theorem4_oracle` checks by brute force at a given depth.

use super::assertion::{assert_sat, emb};
use super::heap::{Chunk, Dir, Heap, HeapState, IoslError, Place};
use crate::hashing::fnv1a64;
use crate::process::typing::{Action, Typing};
use crate::process::{enumerate_process_traces, Process};
use crate::value::Value;
use std::collections::BTreeSet;
use std::rc::Rc;

/// A total map from (run so far, operation, output) to the next input.
#[derive(Clone)]
pub struct InputSchedule {
    name: String,
    f: Rc<dyn Fn(&[Action], &str, &Value) -> Value>,
}

impl InputSchedule {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[Action], &str, &Value) -> Value + 'static,
    ) -> InputSchedule {
        InputSchedule {
            name: name.into(),
            f: Rc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn next_input(&self, run: &[Action], bio: &str, output: &Value) -> Value {
        (self.f)(run, bio, output)
    }

    /// Wraps `raw` so every response is well-typed: answers outside the
    /// input type fall back to the least typed input.
    pub fn clamped(
        name: impl Into<String>,
        typing: &Typing,
        raw: impl Fn(&[Action], &str, &Value) -> Value + 'static,
    ) -> InputSchedule {
        let typing = typing.clone();
        InputSchedule::new(name, move |run, bio, output| {
            let candidate = raw(run, bio, output);
            match typing.inputs(bio, output) {
                Some(ins) if ins.contains(&candidate) => candidate,
                _ => pick(&typing, bio, output),
            }
        })
    }

    /// The schedule that replays `witness`: while the queried run is a
    /// prefix of the witness, answer with the witness's next input for a
    /// matching operation and output; anywhere else answer with the least
    /// typed input.
    pub fn replaying(witness: &[Action], typing: &Typing) -> InputSchedule {
        let witness: Vec<Action> = witness.to_vec();
        let typing = typing.clone();
        InputSchedule::new("replay", move |run, bio, output| {
            let mut rest = witness.as_slice();
            for step in run {
                match rest.split_first() {
                    Some((head, tail)) if head == step => rest = tail,
                    _ => return pick(&typing, bio, output),
                }
            }
            match rest.first() {
                Some(head) if head.bio == bio && head.output == *output => head.input.clone(),
                _ => pick(&typing, bio, output),
            }
        })
    }

    /// A deterministic pseudo-random well-typed schedule.
    pub fn seeded(seed: u64, typing: &Typing) -> InputSchedule {
        let typing = typing.clone();
        InputSchedule::new(format!("seeded-{seed}"), move |run, bio, output| {
            let ins: Vec<&Value> = typing
                .inputs(bio, output)
                .map(|s| s.iter().collect())
                .unwrap_or_default();
            if ins.is_empty() {
                panic!("schedule queried for untyped operation {bio}({output})");
            }
            let key = format!("{seed}|{bio}|{output:?}|{run:?}");
            let k = fnv1a64(key.as_bytes()) as usize % ins.len();
            ins[k].clone()
        })
    }
}

impl std::fmt::Debug for InputSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "InputSchedule({})", self.name)
    }
}

fn pick(typing: &Typing, bio: &str, output: &Value) -> Value {
    typing
        .pick(bio, output)
        .unwrap_or_else(|| panic!("schedule queried for untyped operation {bio}({output})"))
}

/// The witness schedule of a trace: `InputSchedule::replaying`.
pub fn rho_wit(witness: &[Action], typing: &Typing) -> InputSchedule {
    InputSchedule::replaying(witness, typing)
}

/// The permission charted at tree position `pos` of `p`, if any: at most
/// one chunk. `ppos` is the place anchoring the pending prefix, `cpos` the
/// place allocated to the current node.
pub fn pm(
    p: &Process,
    rho: &InputSchedule,
    run: &[Action],
    ppos: &Place,
    cpos: &Place,
    pos: &[Dir],
) -> Heap {
    match (p, pos.split_first()) {
        (Process::Prefix { bio, output, .. }, None) => {
            let w = rho.next_input(run, bio, output);
            Heap::from_chunks([Chunk::perm(
                bio.clone(),
                ppos.clone(),
                output.clone(),
                w,
                cpos.child(Dir::L),
            )])
        }
        (Process::Prefix { bio, output, cont }, Some((Dir::L, rest))) => {
            let w = rho.next_input(run, bio, output);
            let mut run = run.to_vec();
            run.push(Action::new(bio.clone(), output.clone(), w.clone()));
            let down = cpos.child(Dir::L);
            pm(&cont(&w), rho, &run, &down, &down, rest)
        }
        (Process::Choice(lhs, _), Some((Dir::L, rest))) => {
            pm(lhs, rho, run, ppos, &cpos.child(Dir::L), rest)
        }
        (Process::Choice(_, rhs), Some((Dir::R, rest))) => {
            pm(rhs, rho, run, ppos, &cpos.child(Dir::R), rest)
        }
        _ => Heap::new(),
    }
}

/// The permissions of `p` under `rho`, summed over every tree position.
/// Fails with `BoundExceeded` if the tree is still alive once allocated
/// places reach `bound` directions, which happens exactly for processes
/// that unfold forever under `rho`.
pub fn gmod(
    p: &Process,
    rho: &InputSchedule,
    run: &[Action],
    ppos: &Place,
    cpos: &Place,
    bound: usize,
) -> Result<Heap, IoslError> {
    match p {
        Process::Inactive => Ok(Heap::new()),
        _ if cpos.len() >= bound => Err(IoslError::BoundExceeded { bound }),
        Process::Prefix { bio, output, cont } => {
            let w = rho.next_input(run, bio, output);
            let down = cpos.child(Dir::L);
            let mut extended = run.to_vec();
            extended.push(Action::new(bio.clone(), output.clone(), w.clone()));
            let rest = gmod(&cont(&w), rho, &extended, &down, &down, bound)?;
            Ok(rest.sum(&Heap::from_chunks([Chunk::perm(
                bio.clone(),
                ppos.clone(),
                output.clone(),
                w,
                down,
            )])))
        }
        Process::Choice(lhs, rhs) => {
            let left = gmod(lhs, rho, run, ppos, &cpos.child(Dir::L), bound)?;
            let right = gmod(rhs, rho, run, ppos, &cpos.child(Dir::R), bound)?;
            Ok(left.sum(&right))
        }
    }
}

/// `gmod` plus the token sitting at the pending prefix's place.
pub fn gmod_tok(
    p: &Process,
    rho: &InputSchedule,
    run: &[Action],
    ppos: &Place,
    cpos: &Place,
    bound: usize,
) -> Result<Heap, IoslError> {
    let h = gmod(p, rho, run, ppos, cpos, bound)?;
    Ok(h.sum(&Heap::from_chunks([Chunk::token(ppos.clone())])))
}

/// The canonical heap of `p` under `rho`: `gmod` from the root.
pub fn cmod(p: &Process, rho: &InputSchedule, bound: usize) -> Result<Heap, IoslError> {
    gmod(p, rho, &[], &Place::root(), &Place::root(), bound)
}

/// The canonical model: `cmod` plus a token at the root.
pub fn cmod_tok(p: &Process, rho: &InputSchedule, bound: usize) -> Result<Heap, IoslError> {
    gmod_tok(p, rho, &[], &Place::root(), &Place::root(), bound)
}

/// Place-length bound that accommodates traces of the given depth for
/// processes whose choices nest at most three deep per step.
pub fn default_place_bound(depth: usize) -> usize {
    4 * depth + 4
}

/// Whether every step of `run` is executable starting from `h0`.
pub fn heap_executable(h0: &Heap, run: &[Action], typing: &Typing) -> bool {
    replay(h0, run, typing).is_some()
}

/// Whether `run` is executable from `h0` with some execution ending in a
/// live (non-chaos) heap.
pub fn heap_executable_to_live(h0: &Heap, run: &[Action], typing: &Typing) -> bool {
    replay(h0, run, typing)
        .is_some_and(|states| states.iter().any(|s| matches!(s, HeapState::Live(_))))
}

fn replay(h0: &Heap, run: &[Action], typing: &Typing) -> Option<BTreeSet<HeapState>> {
    let mut states = BTreeSet::from([HeapState::Live(h0.clone())]);
    for action in run {
        let mut next = BTreeSet::new();
        for s in &states {
            next.extend(super::heap::heap_step(s, action, typing));
        }
        if next.is_empty() {
            return None;
        }
        states = next;
    }
    Some(states)
}

/// Outcome of the trace-equivalence check between a process and its
/// canonical heap models.
#[derive(Debug, Clone)]
pub struct CanonicalReport {
    pub pass: bool,
    pub depth: usize,
    /// Traces of the process at the given depth.
    pub process_trace_count: usize,
    /// Well-typed traces executable to a live heap from the canonical
    /// model built with the trace's own replaying schedule.
    pub canonical_trace_count: usize,
    /// Sample process traces the canonical side misses (at most three).
    pub only_process: Vec<Vec<Action>>,
    /// Sample canonical traces the process cannot take (at most three).
    pub only_canonical: Vec<Vec<Action>>,
    /// Every process trace executes in the canonical model of every
    /// sampled schedule.
    pub containment_ok: bool,
    /// The canonical heap of every sampled schedule satisfies the
    /// process's permission assertion.
    pub embedding_ok: bool,
}

const EMBEDDING_BUDGET: usize = 2_000_000;

/// Cross-checks three independent views of a process at a given depth:
/// its operational traces, the traces its canonical heap family admits,
/// and its embedding assertion.
///
/// The canonical side enumerates every well-typed action sequence up to
/// `depth` and keeps those executable to a live heap from the canonical
/// model under the sequence's own replaying schedule; no knowledge of the
/// process's transitions is reused. `extra_schedules` further pseudo-random
/// schedules (plus the least-input schedule) feed the containment and
/// embedding sub-checks.
pub fn theorem4_oracle(
    p: &Process,
    typing: &Typing,
    depth: usize,
    extra_schedules: usize,
) -> Result<CanonicalReport, IoslError> {
    let bound = default_place_bound(depth);
    let t_proc = enumerate_process_traces(p, typing, depth);

    let actions = typing.actions();
    let mut t_can: BTreeSet<Vec<Action>> = BTreeSet::new();
    let mut frontier: Vec<Vec<Action>> = vec![Vec::new()];
    while let Some(candidate) = frontier.pop() {
        let rho = InputSchedule::replaying(&candidate, typing);
        let h0 = cmod_tok(p, &rho, bound)?;
        if heap_executable_to_live(&h0, &candidate, typing) {
            t_can.insert(candidate.clone());
        }
        if candidate.len() < depth {
            for a in &actions {
                let mut longer = candidate.clone();
                longer.push(a.clone());
                frontier.push(longer);
            }
        }
    }

    let only_process: Vec<Vec<Action>> =
        t_proc.difference(&t_can).take(3).cloned().collect();
    let only_canonical: Vec<Vec<Action>> =
        t_can.difference(&t_proc).take(3).cloned().collect();

    let mut schedules = vec![InputSchedule::clamped("least", typing, |_, _, _| {
        Value::Unit
    })];
    for k in 0..extra_schedules {
        schedules.push(InputSchedule::seeded(k as u64, typing));
    }

    let mut containment_ok = true;
    let mut embedding_ok = true;
    for rho in &schedules {
        let model = cmod_tok(p, rho, bound)?;
        containment_ok &= t_proc.iter().all(|tau| heap_executable(&model, tau, typing));
        let open = cmod(p, rho, bound)?;
        embedding_ok &=
            assert_sat(&open, &emb(p, &Place::root(), typing), typing, EMBEDDING_BUDGET)?;
    }

    let pass =
        only_process.is_empty() && only_canonical.is_empty() && containment_ok && embedding_ok;
    Ok(CanonicalReport {
        pass,
        depth,
        process_trace_count: t_proc.len(),
        canonical_trace_count: t_can.len(),
        only_process,
        only_canonical,
        containment_ok,
        embedding_ok,
    })
}
