//! Scenario-driven batch runner for the `nhqw` binary.
//!
//! A scenario file names one command and its parameters; [`run`] evaluates it
//! (grid sweeps in parallel) and returns CSV tables with fixed headers.

pub mod csv;
mod error;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use run::{run, run_with_threads, write_outputs, Output};
pub use scenario::{parse_scenario, Command, Job, Scenario};
