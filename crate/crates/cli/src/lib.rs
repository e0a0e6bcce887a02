//! Command-line front end for `fewlase-core`: configuration parsing,
//! CSV/JSON output and the subcommands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use fewlase_core::Error as CoreError;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_SWEEP: i32 = 5;

/// A failure carrying the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self::new(EXIT_SCHEMA, message)
    }

    pub fn physics(message: impl Into<String>) -> Self {
        Self::new(EXIT_PHYSICS, message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_OTHER, format!("i/o error: {e}"))
    }
}

pub fn exit_code(e: &CoreError) -> i32 {
    use CoreError::*;
    match e.root() {
        InvalidConfiguration(_) | DiagonalCoupling(_) | IndexOutOfRange { .. } | InvalidGrid(_) | InvalidSweep(_) => {
            EXIT_SCHEMA
        }
        CoincidentAtoms { .. }
        | ZeroDisplacement
        | NotPositiveSemidefinite { .. }
        | NonUniqueSteadyState { .. }
        | SteadyStateResidual(_)
        | DarkSpectrum
        | ZeroAbsorption => EXIT_PHYSICS,
        DefectiveBlock { .. } | EigenFailure | IntegrationNotConverged { .. } => EXIT_NUMERICAL,
        DimensionMismatch { .. } | SweepPoint { .. } => EXIT_OTHER,
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::new(exit_code(&e), e.to_string())
    }
}
