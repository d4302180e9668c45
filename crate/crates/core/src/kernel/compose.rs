//! Parallel composition of event systems and of trace sets.
//!
//! A synchronization map combines one event from each side into a composed
//! event, or leaves the pair unsynchronized (no composed step). The product
//! system's traces equal the position-wise composition of the component
//! trace sets; `compose_trace_sets` computes the latter directly so that
//! the equality is testable on small systems.

use crate::event::{Event, Trace};
use crate::kernel::es::EventSystem;
use std::collections::BTreeSet;
use std::rc::Rc;

/// Partial map combining component events into composed events.
///
/// Well-formed maps send `(skip, skip)` to `skip`; the built-in
/// constructors guarantee it, which keeps the stutter loop available in
/// the product.
#[derive(Clone)]
pub struct SyncMap {
    name: String,
    combine: Rc<dyn Fn(&Event, &Event) -> Option<Event>>,
}

impl SyncMap {
    pub fn new(
        name: impl Into<String>,
        combine: impl Fn(&Event, &Event) -> Option<Event> + 'static,
    ) -> SyncMap {
        SyncMap {
            name: name.into(),
            combine: Rc::new(combine),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn combine(&self, left: &Event, right: &Event) -> Option<Event> {
        (self.combine)(left, right)
    }

    /// Pure interleaving: a non-skip event on one side pairs with skip on
    /// the other and keeps its identity; two non-skip events never
    /// synchronize.
    pub fn interleaving() -> SyncMap {
        SyncMap::new("interleave", |l, r| match (l.is_skip(), r.is_skip()) {
            (true, true) => Some(Event::skip()),
            (false, true) => Some(l.clone()),
            (true, false) => Some(r.clone()),
            (false, false) => None,
        })
    }
}

/// Synchronized product of two systems. The transition relation is exactly
/// the set of combinable joint steps; initial states are all pairs.
pub fn compose_parallel<S1, S2>(
    left: &EventSystem<S1>,
    right: &EventSystem<S2>,
    chi: &SyncMap,
) -> EventSystem<(S1, S2)>
where
    S1: Ord + Clone + 'static,
    S2: Ord + Clone + 'static,
{
    let mut initial = Vec::new();
    for a in left.initial() {
        for b in right.initial() {
            initial.push((a.clone(), b.clone()));
        }
    }
    let left = left.clone();
    let right = right.clone();
    let chi = chi.clone();
    EventSystem::from_raw(initial, move |(s1, s2)| {
        let mut out = Vec::new();
        for (e1, s1b) in left.successors(s1) {
            for (e2, s2b) in right.successors(s2) {
                if let Some(e) = chi.combine(&e1, &e2) {
                    out.push((e, (s1b.clone(), s2b.clone())));
                }
            }
        }
        out
    })
}

/// n-ary interleaving of a family of systems over a shared state type.
/// Exactly one member moves per non-skip composed event; the composed
/// `skip` stutters every member.
pub fn interleave_family<S>(members: Vec<EventSystem<S>>) -> EventSystem<Vec<S>>
where
    S: Ord + Clone + 'static,
{
    let mut initials: Vec<Vec<S>> = vec![Vec::new()];
    for m in &members {
        let mut grown = Vec::new();
        for partial in &initials {
            for s in m.initial() {
                let mut p = partial.clone();
                p.push(s.clone());
                grown.push(p);
            }
        }
        initials = grown;
    }
    EventSystem::from_raw(initials, move |states: &Vec<S>| {
        let mut out = vec![(Event::skip(), states.clone())];
        for (i, m) in members.iter().enumerate() {
            for (e, s2) in m.successors(&states[i]) {
                if e.is_skip() {
                    continue;
                }
                let mut next = states.clone();
                next[i] = s2;
                out.push((e, next));
            }
        }
        out
    })
}

/// Position-wise composition of two trace sets: a trace belongs to the
/// result iff it arises from same-length members combined at every index.
pub fn compose_trace_sets(
    left: &BTreeSet<Trace>,
    right: &BTreeSet<Trace>,
    chi: &SyncMap,
) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    for t1 in left {
        for t2 in right {
            if t1.len() != t2.len() {
                continue;
            }
            let mut composed = Vec::with_capacity(t1.len());
            let mut ok = true;
            for (e1, e2) in t1.iter().zip(t2.iter()) {
                match chi.combine(e1, e2) {
                    Some(e) => composed.push(e),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                out.insert(composed);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::es::enumerate_traces;
    use crate::value::Value;

    fn tagged(name: &str, n: i64) -> Event {
        Event::new(name, vec![Value::Int(n)])
    }

    /// A chain that fires `name(0), name(1), ...` up to `len`.
    fn chain(name: &'static str, len: i64) -> EventSystem<i64> {
        EventSystem::new(vec![0], move |s| {
            if *s < len {
                vec![(tagged(name, *s), s + 1)]
            } else {
                vec![]
            }
        })
    }

    #[test]
    fn name_matching_sync_composes_to_diagonal() {
        let a = chain("step", 3);
        let b = chain("step", 3);
        let chi = SyncMap::new("match-names", |l, r| {
            if l.is_skip() && r.is_skip() {
                Some(Event::skip())
            } else if l == r {
                Some(l.clone())
            } else {
                None
            }
        });
        let prod = compose_parallel(&a, &b, &chi);
        let traces = enumerate_traces(&prod, prod.initial(), 3);
        // Only lockstep progress (plus stuttering) survives.
        assert!(traces.contains(&vec![tagged("step", 0), tagged("step", 1)]));
        assert!(!traces
            .iter()
            .any(|t| t.iter().filter(|e| !e.is_skip()).count() > 0
                && t.iter().any(|e| e.is_skip())
                && t.len() == 1));
        let direct = compose_trace_sets(
            &enumerate_traces(&a, a.initial(), 3),
            &enumerate_traces(&b, b.initial(), 3),
            &chi,
        );
        assert_eq!(traces, direct);
    }

    #[test]
    fn interleaving_matches_positionwise_composition() {
        let a = chain("left", 2);
        let b = chain("right", 2);
        let chi = SyncMap::interleaving();
        let prod = compose_parallel(&a, &b, &chi);
        let got = enumerate_traces(&prod, prod.initial(), 3);
        let want = compose_trace_sets(
            &enumerate_traces(&a, a.initial(), 3),
            &enumerate_traces(&b, b.initial(), 3),
            &chi,
        );
        assert_eq!(got, want);
        assert!(got.contains(&vec![tagged("left", 0), tagged("right", 0), tagged("left", 1)]));
    }

    #[test]
    fn singleton_family_is_trace_equal_to_its_member() {
        let a = chain("only", 2);
        let fam = interleave_family(vec![a.clone()]);
        assert_eq!(
            enumerate_traces(&fam, fam.initial(), 3),
            enumerate_traces(&a, a.initial(), 3)
        );
    }

    #[test]
    fn family_never_pairs_two_moves() {
        let a = chain("l", 2);
        let b = chain("r", 2);
        let fam = interleave_family(vec![a, b]);
        let init = fam.initial()[0].clone();
        for (e, _) in fam.successors(&init) {
            // Each successor event comes from exactly one member (or skip).
            assert!(e.is_skip() || e.name == "l" || e.name == "r");
        }
        let traces = enumerate_traces(&fam, fam.initial(), 4);
        assert!(traces.contains(&vec![
            tagged("r", 0),
            tagged("l", 0),
            tagged("r", 1),
            tagged("l", 1)
        ]));
    }

    #[test]
    fn trace_set_composition_requires_equal_lengths() {
        let chi = SyncMap::interleaving();
        let mut left = BTreeSet::new();
        left.insert(vec![tagged("a", 0)]);
        let mut right = BTreeSet::new();
        right.insert(vec![Event::skip()]);
        right.insert(vec![]);
        let out = compose_trace_sets(&left, &right, &chi);
        assert_eq!(out.len(), 1);
        assert!(out.contains(&vec![tagged("a", 0)]));
    }
}
