//! A desk-scale toolkit for building distributed protocols as layered
//! event systems and carrying their guarantees down to running code.
//!
//! The crate covers the full pipeline: abstract models and trace
//! properties, forward-simulation refinement between layers, parallel
//! composition and decomposition into per-node components, translation of
//! guarded components into process terms and I/O-permission heaps, runtime
//! monitors that check an implementation's I/O against its component
//! model, and a deterministic simulator that drives hand-written node
//! programs through those monitors over faulty networks.

pub mod cli;
pub mod event;
pub mod hashing;
pub mod iosl;
pub mod kernel;
pub mod monitor;
pub mod process;
pub mod protocols;
pub mod sampling;
pub mod simnet;
pub mod value;

pub use event::{Event, Trace};
pub use value::Value;
