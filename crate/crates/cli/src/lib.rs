//! Config-driven experiment harness for `softorder`.
//!
//! Subcommands: `run` trains every (mode, variant, trial) cell of an
//! experiment config, `analyze` summarizes learned scalings, `sweep` renders
//! pixel tasks while one scale varies, and `tracecheck` checks trace
//! identities of cyclic matrix products.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error, 3 data error,
//! 4 singular trace.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod run;
pub mod setup;
pub mod sweep;
pub mod tracecheck;

pub use cli::main_with_args;
pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{HarnessError, HarnessResult};
