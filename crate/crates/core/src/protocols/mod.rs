//! The three case-study protocol stacks: ring leader election,
//! primary-backup replication, and two-party authentication against a
//! network attacker.

pub mod auth;
pub mod dy;
pub mod leader;
pub mod repl;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("term universe is not subterm-closed: missing {0}")]
    UniverseNotClosed(String),
}
