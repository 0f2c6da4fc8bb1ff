//! Command-line workbench for `jcas-core`.
//!
//! This crate adds everything that needs `std`: the JSON experiment
//! configuration, the binary checkpoint format, CSV result tables, SVG
//! plots, thread-parallel validation and the `jcas` subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod parallel;
pub mod plot;
pub mod table;

pub use config::ExperimentConfig;
pub use error::CliError;
