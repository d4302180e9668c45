//! Everything behind the `igloo-kit` command line: scenario files, the
//! versioned JSON report, the I/O specification renderer, and the command
//! implementations themselves. The binary is a thin argument parser over
//! this module, so library callers and the C ABI get identical behavior.

pub mod commands;
pub mod render;
pub mod report;
pub mod scenario;

pub use commands::{
    check_composition_cmd, check_refinement_cmd, check_theorem3_cmd, check_theorem4_cmd,
    dump_iospec_cmd, enumerate_cmd, replay_cmd, simulate_cmd,
};
pub use report::{ConfigError, Report, EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, SCHEMA};
pub use scenario::{builtin, load, Scenario, BUILTIN_NAMES};
