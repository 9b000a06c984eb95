//! Config-driven front end for the autoqec simulator.
//!
//! A run reads one TOML file, resolves it into library parameters, evaluates
//! every sweep point on a worker pool and writes one CSV table.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod pool;
pub mod table;

use std::fmt;

use autoqec_core::Error as CoreError;

pub use config::{load_file, load_str, resolve, validate, Diagnostic, Experiment, Plan, RunConfig};
pub use experiments::run_plan;
pub use table::{ResultTable, Value};

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(Vec<Diagnostic>),
    Numeric(String),
    Leakage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Leakage(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Leakage { .. } => CliError::Leakage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(d) => {
                write!(f, "invalid configuration")?;
                for x in d {
                    write!(f, "\n  {x}")?;
                }
                Ok(())
            }
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Leakage(m) => write!(f, "aborted: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Resolves and runs `config` on `workers` threads.
pub fn run(config: &RunConfig, workers: usize) -> Result<ResultTable, CliError> {
    let plan = resolve(config).map_err(CliError::Config)?;
    run_plan(&plan, workers)
}
