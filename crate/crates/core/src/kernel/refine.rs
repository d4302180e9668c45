//! Forward-simulation refinement checking between two event systems.
//!
//! The concrete system refines the abstract one through a mediator that
//! renames each concrete event to the abstract event it implements (or to
//! `skip` when it is pure implementation detail). The check walks related
//! state pairs breadth-first: a pass certifies that the mediated image of
//! every bounded concrete trace is an abstract trace.

use crate::event::{Event, Trace};
use crate::kernel::es::{EventSystem, TraceProperty};
use std::collections::BTreeSet;
use std::fmt::Debug;
use std::rc::Rc;

/// Total event translation from concrete to abstract alphabets.
/// Always maps `skip` to `skip` (enforced at construction).
#[derive(Clone)]
pub struct Mediator {
    name: String,
    map: Rc<dyn Fn(&Event) -> Event>,
}

impl Mediator {
    pub fn new(name: impl Into<String>, map: impl Fn(&Event) -> Event + 'static) -> Mediator {
        let m = Mediator {
            name: name.into(),
            map: Rc::new(map),
        };
        assert!(
            m.apply(&Event::skip()).is_skip(),
            "mediator {} must map skip to skip",
            m.name
        );
        m
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, e: &Event) -> Event {
        (self.map)(e)
    }

    /// Composition: `self` after `first` (apply `first`, then `self`).
    pub fn after(&self, first: &Mediator) -> Mediator {
        let f = first.clone();
        let g = self.clone();
        Mediator::new(format!("{}*{}", g.name, f.name), move |e| g.apply(&f.apply(e)))
    }
}

pub fn map_trace(pi: &Mediator, trace: &[Event]) -> Trace {
    trace.iter().map(|e| pi.apply(e)).collect()
}

/// The property accepting exactly the traces whose mediated image the
/// given property accepts.
pub fn preimage_property(pi: &Mediator, property: &TraceProperty) -> TraceProperty {
    let pi = pi.clone();
    let inner = property.clone();
    TraceProperty::new(format!("{}^{}-preimage", inner.name(), pi.name()), move |t| {
        inner.accepts(&map_trace(&pi, t))
    })
}

/// A candidate simulation relation between abstract and concrete states.
#[derive(Clone)]
pub struct SimulationRelation<SA, SC> {
    related: Rc<dyn Fn(&SA, &SC) -> bool>,
}

impl<SA, SC> SimulationRelation<SA, SC> {
    pub fn new(related: impl Fn(&SA, &SC) -> bool + 'static) -> Self {
        SimulationRelation {
            related: Rc::new(related),
        }
    }

    pub fn related(&self, sa: &SA, sc: &SC) -> bool {
        (self.related)(sa, sc)
    }
}

pub const DEFAULT_PAIR_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefinementVerdict {
    Pass {
        pairs_explored: usize,
    },
    Fail {
        failure: RefinementFailure,
    },
    /// Exploration hit the pair budget before reaching the depth bound.
    BudgetExceeded {
        pairs_explored: usize,
    },
}

impl RefinementVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RefinementVerdict::Pass { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefinementFailure {
    /// A concrete initial state is related to no abstract initial state.
    Init { concrete_state: String },
    /// A related pair has a concrete step with no matching abstract step.
    Step {
        abstract_state: String,
        concrete_state: String,
        event: Event,
        mediated: Event,
        /// Concrete events leading to the violating pair.
        trace: Trace,
    },
}

/// Bounded forward-simulation check of `concrete` against `abstract_sys`.
///
/// Explores every relation pair reachable within `depth` concrete steps:
/// starting from all related initial pairs, each concrete step must be
/// matched by some abstract step labeled with the mediated event and
/// landing in a related state; all such matches are followed.
pub fn check_refinement<SA, SC>(
    concrete: &EventSystem<SC>,
    abstract_sys: &EventSystem<SA>,
    relation: &SimulationRelation<SA, SC>,
    pi: &Mediator,
    depth: usize,
    pair_budget: usize,
) -> RefinementVerdict
where
    SA: Ord + Clone + Debug,
    SC: Ord + Clone + Debug,
{
    let mut visited: BTreeSet<(SA, SC)> = BTreeSet::new();
    // Queue entries carry the concrete trace that reached them, for
    // counterexample reporting.
    let mut frontier: Vec<((SA, SC), Trace)> = Vec::new();

    for sc in concrete.initial() {
        let mut any = false;
        for sa in abstract_sys.initial() {
            if relation.related(sa, sc) {
                any = true;
                let pair = (sa.clone(), sc.clone());
                if visited.insert(pair.clone()) {
                    frontier.push((pair, Vec::new()));
                }
            }
        }
        if !any {
            return RefinementVerdict::Fail {
                failure: RefinementFailure::Init {
                    concrete_state: format!("{sc:?}"),
                },
            };
        }
    }

    for _ in 0..depth {
        let mut next = Vec::new();
        for ((sa, sc), trace) in frontier {
            for (ec, sc2) in concrete.successors(&sc) {
                let ea = pi.apply(&ec);
                let mut matched = false;
                for (cand_event, sa2) in abstract_sys.successors(&sa) {
                    if cand_event == ea && relation.related(&sa2, &sc2) {
                        matched = true;
                        let pair = (sa2, sc2.clone());
                        if visited.insert(pair.clone()) {
                            if visited.len() > pair_budget {
                                return RefinementVerdict::BudgetExceeded {
                                    pairs_explored: visited.len(),
                                };
                            }
                            let mut t = trace.clone();
                            t.push(ec.clone());
                            next.push((pair, t));
                        }
                    }
                }
                if !matched {
                    let mut t = trace.clone();
                    t.push(ec.clone());
                    return RefinementVerdict::Fail {
                        failure: RefinementFailure::Step {
                            abstract_state: format!("{sa:?}"),
                            concrete_state: format!("{sc:?}"),
                            event: ec,
                            mediated: ea,
                            trace: t,
                        },
                    };
                }
            }
        }
        frontier = next;
    }

    RefinementVerdict::Pass {
        pairs_explored: visited.len(),
    }
}
