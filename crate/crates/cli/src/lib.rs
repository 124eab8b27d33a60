//! Experiment driver for the distortion-robustness laboratory: a `distlab`
//! binary with `baseline`, `distort`, `run`, and `diagnose` subcommands,
//! exposed here as a library so tests can call the same code paths
//! in-process.

pub mod baseline;
pub mod commands;
pub mod error;
pub mod ident;
pub mod plan;

pub use error::{Class, CliError, Result};
