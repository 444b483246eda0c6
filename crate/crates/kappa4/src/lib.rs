//! Command-line tools for the four-parameter kappa distribution: data and
//! configuration files, JSON/CSV/text reports, and multi-threaded drivers
//! around `kappa4-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;
pub mod parallel;
pub mod report;

pub use error::{CliError, EXIT_INPUT, EXIT_NO_CONVERGENCE, EXIT_OK};
