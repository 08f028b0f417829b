//! Command-line front end: JSON problem files, the solve/validate/oracle
//! pipelines, and machine-readable reports.
//!
//! Exit codes are the only pass/fail channel: 0 success, 2 tolerance or
//! threshold not met, 3 infeasible, 64 schema or argument violation, 65
//! expression error, 70 numeric failure, 74 output I/O failure. Stdout
//! carries the path of the written report; diagnostics go to stderr.

pub mod commands;
pub mod problem;
pub mod report;

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Schema violations, unknown keys, malformed arguments. Exit 64.
    Schema(String),
    /// Expression parse/signature errors. Exit 65.
    Expr(String),
    /// Numeric failures in assembly, quadrature, or solving. Exit 70.
    Numeric(String),
    /// Failures writing outputs. Exit 74.
    OutputIo(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 64,
            CliError::Expr(_) => 65,
            CliError::Numeric(_) => 70,
            CliError::OutputIo(_) => 74,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(msg) => write!(f, "problem file: {msg}"),
            CliError::Expr(msg) => write!(f, "expression: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric: {msg}"),
            CliError::OutputIo(msg) => write!(f, "output: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SCHEMA: i32 = 64;
pub const EXIT_EXPR: i32 = 65;
pub const EXIT_NUMERIC: i32 = 70;
