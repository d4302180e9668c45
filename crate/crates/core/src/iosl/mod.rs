//! Separation-logic view of I/O: permission heaps, assertions over them,
//! and canonical heap models of processes.

pub mod assertion;
pub mod canonical;
pub mod heap;

pub use assertion::{assert_sat, emb, emb_tok, Assertion, PlaceDomain};
pub use canonical::{
    cmod, cmod_tok, default_place_bound, gmod, gmod_tok, heap_executable,
    heap_executable_to_live, pm, rho_wit, theorem4_oracle, CanonicalReport, InputSchedule,
};
pub use heap::{
    enabled_actions, heap_step, heap_traces, heapset_traces, Chunk, Dir, Heap, HeapState,
    IoslError, Place,
};
