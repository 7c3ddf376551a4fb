//! Experiment harness for the `sparsest-core` solvers: configuration,
//! file formats and the commands behind the `sparsest` binary.

pub mod config;
pub mod error;
pub mod format;
pub mod harness;

pub use config::{ExperimentConfig, InitKind, KvConfig, ModelParams};
pub use error::{exit, CliError, Result};
