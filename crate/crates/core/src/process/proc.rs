//! A minimal process calculus for I/O behaviors.
//!
//! Terms are inactive, an action prefix `bio(v, z). P` binding the input
//! `z` in the continuation, or a binary choice. Continuations are closures
//! evaluated on demand, so corecursively defined (non-terminating)
//! processes are ordinary values; the only requirement is productivity:
//! every infinite path must keep passing through prefixes.

use crate::process::typing::{Action, Typing};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

#[derive(Clone)]
pub enum Process {
    Inactive,
    Prefix {
        bio: String,
        output: crate::value::Value,
        cont: Rc<dyn Fn(&crate::value::Value) -> Process>,
    },
    Choice(Rc<Process>, Rc<Process>),
}

impl Process {
    pub fn prefix(
        bio: impl Into<String>,
        output: crate::value::Value,
        cont: impl Fn(&crate::value::Value) -> Process + 'static,
    ) -> Process {
        Process::Prefix {
            bio: bio.into(),
            output,
            cont: Rc::new(cont),
        }
    }

    pub fn choice(left: Process, right: Process) -> Process {
        Process::Choice(Rc::new(left), Rc::new(right))
    }

    /// A prefix that ignores its input.
    pub fn action(
        bio: impl Into<String>,
        output: crate::value::Value,
        then: Process,
    ) -> Process {
        let then = Rc::new(then);
        Process::prefix(bio, output, move |_| (*then).clone())
    }
}

impl fmt::Debug for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Inactive => write!(f, "0"),
            Process::Prefix { bio, output, .. } => write!(f, "{bio}({output}, _)._"),
            Process::Choice(l, r) => write!(f, "({l:?} (+) {r:?})"),
        }
    }
}

/// One-step successors: a prefix steps once per well-typed input, a choice
/// offers the union of its branches' steps. Order is canonical (inputs in
/// type order, left branch before right).
pub fn process_successors(p: &Process, typing: &Typing) -> Vec<(Action, Process)> {
    match p {
        Process::Inactive => Vec::new(),
        Process::Prefix { bio, output, cont } => {
            let Some(inputs) = typing.inputs(bio, output) else {
                return Vec::new();
            };
            inputs
                .iter()
                .map(|w| (Action::new(bio.clone(), output.clone(), w.clone()), cont(w)))
                .collect()
        }
        Process::Choice(l, r) => {
            let mut out = process_successors(l, typing);
            out.extend(process_successors(r, typing));
            out
        }
    }
}

/// Finite fold of choice over `values` in the given order, with the
/// inactive process as the right unit: `⟨⟩` yields `Inactive`, and
/// `[v1, .., vn]` yields `body(v1) ⊕ (body(v2) ⊕ (.. ⊕ Inactive))`.
pub fn finite_choice(
    values: &[crate::value::Value],
    body: impl Fn(&crate::value::Value) -> Process,
) -> Process {
    values
        .iter()
        .rev()
        .fold(Process::Inactive, |acc, v| Process::choice(body(v), acc))
}

/// All action traces of length at most `depth`.
///
/// Continuation unfoldings are cached per (shared node, input) while the
/// enumeration runs, so DAG-shaped terms cost their node count rather than
/// their path count.
pub fn enumerate_process_traces(
    p: &Process,
    typing: &Typing,
    depth: usize,
) -> BTreeSet<Vec<Action>> {
    let mut traces = BTreeSet::new();
    let mut memo: Memo = HashMap::new();
    let root = Rc::new(p.clone());
    let mut pending = vec![(root, Vec::new())];
    while let Some((node, trace)) = pending.pop() {
        traces.insert(trace.clone());
        if trace.len() == depth {
            continue;
        }
        for (action, succ) in successors_shared(&node, typing, &mut memo) {
            let mut t = trace.clone();
            t.push(action);
            pending.push((succ, t));
        }
    }
    traces
}

type Memo = HashMap<(usize, Action), Rc<Process>>;

/// Successors with Rc-shared continuations. The memo key holds the node's
/// address; the map retains an Rc for every cached continuation, keeping
/// all keyed addresses alive (and therefore distinct) for the memo's life.
fn successors_shared(
    node: &Rc<Process>,
    typing: &Typing,
    memo: &mut Memo,
) -> Vec<(Action, Rc<Process>)> {
    match node.as_ref() {
        Process::Inactive => Vec::new(),
        Process::Prefix { bio, output, cont } => {
            let Some(inputs) = typing.inputs(bio, output) else {
                return Vec::new();
            };
            let key_base = Rc::as_ptr(node) as usize;
            inputs
                .iter()
                .map(|w| {
                    let action = Action::new(bio.clone(), output.clone(), w.clone());
                    let succ = memo
                        .entry((key_base, action.clone()))
                        .or_insert_with(|| Rc::new(cont(w)))
                        .clone();
                    (action, succ)
                })
                .collect()
        }
        Process::Choice(l, r) => {
            let mut out = successors_shared(l, typing, memo);
            out.extend(successors_shared(r, typing, memo));
            out
        }
    }
}
