//! Process calculus over basic I/O operations.
//!
//! A process offers prefixes `bio(v).k` whose continuation receives the
//! input chosen by the environment, or a binary choice between processes.
//! Execution is relative to a finite [`Typing`] assigning each operation
//! and output its non-empty set of admissible inputs: an unregistered
//! (operation, output) pair simply never fires.

pub mod guarded;
pub mod proc;
pub mod typing;

pub use guarded::{proc_of_ges, EventRender, GuardedError, IoEvent, IoGuardedEs};
pub use proc::{enumerate_process_traces, finite_choice, process_successors, Process};
pub use typing::{Action, Typing};
