//! Event systems, refinement, and composition.

pub mod compose;
pub mod es;
pub mod refine;

pub use compose::{compose_parallel, compose_trace_sets, interleave_family, SyncMap};
pub use es::{enumerate_traces, satisfies, EventSystem, SatisfiesOutcome, TraceProperty};
pub use refine::{
    check_refinement, map_trace, preimage_property, Mediator, RefinementFailure,
    RefinementVerdict, SimulationRelation, DEFAULT_PAIR_BUDGET,
};
