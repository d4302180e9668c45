//! Labeled transition systems over opaque states, with explicit stuttering.
//!
//! A system is a set of initial states plus a successor function. All state
//! exploration in the crate is bounded by an explicit depth and walks
//! successor sets in their canonical order, so results are reproducible.

use crate::event::{Event, Trace};
use std::collections::BTreeSet;
use std::rc::Rc;

type SuccFn<S> = Rc<dyn Fn(&S) -> Vec<(Event, S)>>;

/// An event system: initial states plus a finite successor relation.
///
/// Systems built with [`EventSystem::new`] stutter at every state, i.e.
/// `(skip, s)` is always a successor of `s`. [`EventSystem::from_raw`]
/// keeps the relation exactly as given; composition operators use it so
/// that the product relation is definitional.
#[derive(Clone)]
pub struct EventSystem<S> {
    initial: Vec<S>,
    successors: SuccFn<S>,
    auto_skip: bool,
}

impl<S: Ord + Clone> EventSystem<S> {
    pub fn new(initial: Vec<S>, successors: impl Fn(&S) -> Vec<(Event, S)> + 'static) -> Self {
        EventSystem {
            initial,
            successors: Rc::new(successors),
            auto_skip: true,
        }
    }

    /// Builds a system whose successor relation is exactly `successors`.
    /// The caller is responsible for the stutter loop if one is wanted.
    pub fn from_raw(
        initial: Vec<S>,
        successors: impl Fn(&S) -> Vec<(Event, S)> + 'static,
    ) -> Self {
        EventSystem {
            initial,
            successors: Rc::new(successors),
            auto_skip: false,
        }
    }

    pub fn initial(&self) -> &[S] {
        &self.initial
    }

    /// The successor set of `s`, deduplicated and canonically ordered.
    pub fn successors(&self, s: &S) -> BTreeSet<(Event, S)> {
        let mut out: BTreeSet<(Event, S)> = (self.successors)(s).into_iter().collect();
        if self.auto_skip {
            out.insert((Event::skip(), s.clone()));
        }
        out
    }
}

/// All traces of length at most `depth` from the given initial states.
/// Stutter steps appear explicitly, so `enumerate_traces` is closed under
/// inserting `skip` (up to the depth bound).
pub fn enumerate_traces<S: Ord + Clone>(
    es: &EventSystem<S>,
    init: &[S],
    depth: usize,
) -> BTreeSet<Trace> {
    let mut traces = BTreeSet::new();
    traces.insert(Vec::new());
    // Frontier of (state, trace) pairs; traces of equal content but
    // different end states collapse in the output set.
    let mut frontier: Vec<(S, Trace)> = init.iter().map(|s| (s.clone(), Vec::new())).collect();
    for _ in 0..depth {
        let mut next = Vec::new();
        for (state, trace) in frontier {
            for (event, succ) in es.successors(&state) {
                let mut extended = trace.clone();
                extended.push(event);
                traces.insert(extended.clone());
                next.push((succ, extended));
            }
        }
        frontier = next;
    }
    traces
}

/// Every state reachable within `depth` steps, each paired with one
/// shortest witness trace (breadth-first, so witnesses are minimal in
/// length). Useful for checking state invariants where a violating run
/// should be reported.
pub fn reachable_with_witness<S: Ord + Clone>(
    es: &EventSystem<S>,
    init: &[S],
    depth: usize,
) -> Vec<(S, Trace)> {
    let mut seen: BTreeSet<S> = init.iter().cloned().collect();
    let mut out: Vec<(S, Trace)> = init.iter().map(|s| (s.clone(), Vec::new())).collect();
    let mut frontier = out.clone();
    for _ in 0..depth {
        let mut next = Vec::new();
        for (state, trace) in &frontier {
            for (event, succ) in es.successors(state) {
                if seen.insert(succ.clone()) {
                    let mut t = trace.clone();
                    t.push(event);
                    next.push((succ, t));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// A set of traces, represented by a membership test.
#[derive(Clone)]
pub struct TraceProperty {
    name: String,
    accepts: Rc<dyn Fn(&[Event]) -> bool>,
}

impl TraceProperty {
    pub fn new(name: impl Into<String>, accepts: impl Fn(&[Event]) -> bool + 'static) -> Self {
        TraceProperty {
            name: name.into(),
            accepts: Rc::new(accepts),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn accepts(&self, trace: &[Event]) -> bool {
        (self.accepts)(trace)
    }
}

/// Outcome of checking all bounded traces of a system against a property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatisfiesOutcome {
    pub holds: bool,
    /// Minimal violating trace under (length, lexicographic) order.
    pub violation: Option<Trace>,
}

/// A named predicate over states, the state-level analogue of
/// [`TraceProperty`] for invariant checking.
#[derive(Clone)]
pub struct StatePredicate<S> {
    name: String,
    test: Rc<dyn Fn(&S) -> bool>,
}

impl<S> StatePredicate<S> {
    pub fn new(name: impl Into<String>, test: impl Fn(&S) -> bool + 'static) -> Self {
        StatePredicate {
            name: name.into(),
            test: Rc::new(test),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn test(&self, s: &S) -> bool {
        (self.test)(s)
    }
}

/// Checks a state predicate at every state reachable within `depth`
/// steps. Breadth-first with early exit, so a reported violation carries
/// a shortest witness trace.
pub fn holds_invariantly<S: Ord + Clone>(
    es: &EventSystem<S>,
    init: &[S],
    predicate: &StatePredicate<S>,
    depth: usize,
) -> SatisfiesOutcome {
    let mut seen: BTreeSet<S> = init.iter().cloned().collect();
    let mut frontier: Vec<(S, Trace)> = init.iter().map(|s| (s.clone(), Vec::new())).collect();
    for level in 0..=depth {
        for (state, trace) in &frontier {
            if !predicate.test(state) {
                return SatisfiesOutcome {
                    holds: false,
                    violation: Some(trace.clone()),
                };
            }
        }
        if level == depth {
            break;
        }
        let mut next = Vec::new();
        for (state, trace) in &frontier {
            for (event, succ) in es.successors(state) {
                if seen.insert(succ.clone()) {
                    let mut t = trace.clone();
                    t.push(event);
                    next.push((succ, t));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    SatisfiesOutcome {
        holds: true,
        violation: None,
    }
}

/// Checks every trace of length at most `depth`; on failure reports the
/// shortest violating trace (ties broken by event order).
pub fn satisfies<S: Ord + Clone>(
    es: &EventSystem<S>,
    init: &[S],
    property: &TraceProperty,
    depth: usize,
) -> SatisfiesOutcome {
    let mut worst: Option<Trace> = None;
    for trace in enumerate_traces(es, init, depth) {
        if !property.accepts(&trace) {
            let better = match &worst {
                None => true,
                Some(w) => (trace.len(), &trace) < (w.len(), w),
            };
            if better {
                worst = Some(trace);
            }
        }
    }
    SatisfiesOutcome {
        holds: worst.is_none(),
        violation: worst,
    }
}
