//! Replaying recorded traces against a model.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::event::Event;
use crate::kernel::es::{EventSystem, TraceProperty};

/// The result of replaying a trace against a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "replay", rename_all = "kebab-case")]
pub enum ReplayVerdict {
    Pass,
    /// The model could not take `event` after the first `index` events.
    FailAt { index: usize, event: Event },
}

impl ReplayVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ReplayVerdict::Pass)
    }
}

/// Checks that `events` is a trace of `es` by tracking the set of states
/// the model could be in after each prefix. The model's nondeterminism is
/// resolved against the whole set, so a trace passes iff some resolution
/// exists; a failure names the first event no tracked state can take.
pub fn replay_events<S: Ord + Clone>(es: &EventSystem<S>, events: &[Event]) -> ReplayVerdict {
    let mut states: BTreeSet<S> = es.initial().iter().cloned().collect();
    for (index, event) in events.iter().enumerate() {
        let mut next: BTreeSet<S> = BTreeSet::new();
        for s in &states {
            for (e, t) in es.successors(s) {
                if &e == event {
                    next.insert(t);
                }
            }
        }
        if next.is_empty() {
            return ReplayVerdict::FailAt {
                index,
                event: event.clone(),
            };
        }
        states = next;
    }
    ReplayVerdict::Pass
}

/// Applies a trace property to a recorded global trace.
pub fn check_global(events: &[Event], prop: &TraceProperty) -> bool {
    prop.accepts(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    fn toy() -> EventSystem<u8> {
        EventSystem::new(vec![0u8], |s: &u8| {
            if *s < 3 {
                vec![(Event::new("inc", vec![Value::Int(*s as i64 + 1)]), s + 1)]
            } else {
                Vec::new()
            }
        })
    }

    #[test]
    fn empty_trace_replays_in_any_model() {
        assert!(replay_events(&toy(), &[]).passed());
    }

    #[test]
    fn replay_tracks_and_pinpoints() {
        let es = toy();
        let good = vec![
            Event::new("inc", vec![Value::Int(1)]),
            Event::new("inc", vec![Value::Int(2)]),
        ];
        assert!(replay_events(&es, &good).passed());

        let bad = vec![
            Event::new("inc", vec![Value::Int(1)]),
            Event::new("inc", vec![Value::Int(3)]),
        ];
        assert_eq!(
            replay_events(&es, &bad),
            ReplayVerdict::FailAt {
                index: 1,
                event: Event::new("inc", vec![Value::Int(3)]),
            }
        );
    }

    #[test]
    fn stutter_steps_replay_too() {
        let es = toy();
        let trace = vec![Event::skip(), Event::new("inc", vec![Value::Int(1)]), Event::skip()];
        assert!(replay_events(&es, &trace).passed());
    }
}
