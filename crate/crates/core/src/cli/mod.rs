//! Configuration parsing, file formats, and the command implementations
//! behind the `fbvp` binary.

mod commands;
mod config;
mod io;

pub use commands::{run_check, run_solve, run_sweep, run_trace, Options};
pub use config::{build_problem, load_config, load_config_str, RunConfig};
pub use io::{
    atomic_write, curve_from_csv, curve_to_csv, solution_to_csv, CurveMeta, TraceSummaryRecord,
    CURVE_HEADER,
};

use thiserror::Error;

/// Errors mapped onto the exit-code contract: 2 for strict hypothesis
/// violations, 3 for solver/continuation failures, 4 for configuration and
/// environment problems.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypotheses violated: M = {m} is not below min(c0, lambda2) = {bound}")]
    HypothesesViolated { m: f64, bound: f64 },
    #[error("{what}")]
    Stalled { what: String },
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::HypothesesViolated { .. } => 2,
            CliError::Stalled { .. } => 3,
            CliError::Solver(_) => 3,
        }
    }
}
