//! Events and traces.
//!
//! An event is a name applied to ground parameters. Every event system in
//! the crate shares the distinguished stutter event [`Event::skip`], which
//! self-loops at every state and synchronizes components that stay idle
//! during a composed step.

use crate::value::Value;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const SKIP_NAME: &str = "skip";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub params: Vec<Value>,
}

impl Event {
    pub fn new(name: impl Into<String>, params: Vec<Value>) -> Event {
        Event {
            name: name.into(),
            params,
        }
    }

    pub fn named(name: impl Into<String>) -> Event {
        Event::new(name, vec![])
    }

    pub fn skip() -> Event {
        Event::named(SKIP_NAME)
    }

    pub fn is_skip(&self) -> bool {
        self.name == SKIP_NAME && self.params.is_empty()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            write!(f, "(")?;
            for (k, p) in self.params.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A finite sequence of events.
pub type Trace = Vec<Event>;

pub fn render_trace(trace: &[Event]) -> String {
    let inner: Vec<String> = trace.iter().map(|e| e.to_string()).collect();
    format!("\u{27e8}{}\u{27e9}", inner.join(", "))
}
