//! I/O actions and their typing.
//!
//! An action `bio(v, w)` names a basic I/O operation, the output data `v`
//! the caller passes in, and the input data `w` the operation returns.
//! A typing assigns every `(bio, v)` pair a finite, non-empty set of
//! admissible inputs; an action is well-typed when its input belongs to
//! that set.

use crate::event::Event;
use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub bio: String,
    pub output: Value,
    pub input: Value,
}

impl Action {
    pub fn new(bio: impl Into<String>, output: Value, input: Value) -> Action {
        Action {
            bio: bio.into(),
            output,
            input,
        }
    }

    pub fn to_event(&self) -> Event {
        Event::new(self.bio.clone(), vec![self.output.clone(), self.input.clone()])
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.bio, self.output, self.input)
    }
}

/// Finite input typing for a scenario's basic I/O operations.
///
/// Invariant: every registered `(bio, output)` has a non-empty input set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Typing {
    entries: BTreeMap<String, BTreeMap<Value, BTreeSet<Value>>>,
}

impl Typing {
    pub fn new() -> Typing {
        Typing::default()
    }

    /// Registers (or extends) the input set of `(bio, output)`.
    /// Empty input sets are rejected to keep the typing total on its domain.
    pub fn add(
        &mut self,
        bio: impl Into<String>,
        output: Value,
        inputs: impl IntoIterator<Item = Value>,
    ) -> &mut Self {
        let inputs: BTreeSet<Value> = inputs.into_iter().collect();
        assert!(!inputs.is_empty(), "input type must be non-empty");
        self.entries
            .entry(bio.into())
            .or_default()
            .entry(output)
            .or_default()
            .extend(inputs);
        self
    }

    /// Convenience: an operation with unit input (pure output signal).
    pub fn add_signal(&mut self, bio: impl Into<String>, output: Value) -> &mut Self {
        self.add(bio, output, [Value::Unit])
    }

    pub fn bios(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn outputs(&self, bio: &str) -> Vec<Value> {
        self.entries
            .get(bio)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// The input set of `(bio, output)`, if registered.
    pub fn inputs(&self, bio: &str, output: &Value) -> Option<&BTreeSet<Value>> {
        self.entries.get(bio).and_then(|m| m.get(output))
    }

    pub fn is_well_typed(&self, action: &Action) -> bool {
        self.inputs(&action.bio, &action.output)
            .is_some_and(|ins| ins.contains(&action.input))
    }

    /// Deterministic representative input: the least element of the set.
    pub fn pick(&self, bio: &str, output: &Value) -> Option<Value> {
        self.inputs(bio, output)
            .and_then(|ins| ins.iter().next().cloned())
    }

    /// Every well-typed action, in canonical order.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for (bio, by_output) in &self.entries {
            for (output, inputs) in by_output {
                for input in inputs {
                    out.push(Action::new(bio.clone(), output.clone(), input.clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn typing_tracks_domains_and_membership() {
        let mut ty = Typing::new();
        ty.add("recv", Value::Unit, [Value::Int(1), Value::Int(2)]);
        ty.add_signal("send", Value::Int(3));

        assert_eq!(ty.bios().collect::<Vec<_>>(), vec!["recv", "send"]);
        assert_eq!(ty.outputs("send"), vec![Value::Int(3)]);
        assert!(ty.is_well_typed(&Action::new("recv", Value::Unit, Value::Int(2))));
        assert!(!ty.is_well_typed(&Action::new("recv", Value::Unit, Value::Int(9))));
        assert!(!ty.is_well_typed(&Action::new("send", Value::Int(4), Value::Unit)));
        assert_eq!(ty.pick("recv", &Value::Unit), Some(Value::Int(1)));
        assert_eq!(ty.actions().len(), 3);
    }

    #[test]
    #[should_panic(expected = "non-empty")]
    fn empty_input_sets_are_rejected() {
        Typing::new().add("recv", Value::Unit, []);
    }
}
