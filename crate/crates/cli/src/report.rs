//! The JSON report written by `okoc solve`.

use serde::{Deserialize, Serialize};

use okoc_core::solver::{SolveResult, SolveStatus};

use crate::problem::ProblemFile;
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    /// Fully resolved configuration; feeding it back as a problem file
    /// reproduces the run bit for bit.
    pub problem: ProblemFile,
    pub objective: f64,
    pub eq_residual_inf: f64,
    pub ball_s_used: f64,
    pub ball_d_used: f64,
    pub stationarity: f64,
    pub status: String,
    pub iterations: usize,
    pub dropped_rows: Vec<usize>,
    pub far_sigma_rows: Vec<usize>,
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn status_string(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::ToleranceNotMet => "tolerance_not_met",
        SolveStatus::Infeasible => "infeasible",
    }
}

impl Report {
    pub fn new(
        problem: ProblemFile,
        result: &SolveResult,
        far_sigma_rows: Vec<usize>,
        wall_clock_seconds: f64,
        emit_weights: bool,
    ) -> Result<Self, CliError> {
        let report = Report {
            problem,
            objective: result.objective,
            eq_residual_inf: result.eq_residual_inf,
            ball_s_used: result.ball_s_used,
            ball_d_used: result.ball_d_used,
            stationarity: result.stationarity,
            status: status_string(result.status).to_string(),
            iterations: result.iterations,
            dropped_rows: result.dropped_rows.clone(),
            far_sigma_rows,
            wall_clock_seconds,
            weights: emit_weights.then(|| Weights {
                w: result.w.iter().copied().collect(),
                v: result.v.iter().copied().collect(),
            }),
        };
        for (name, value) in [
            ("objective", report.objective),
            ("eq_residual_inf", report.eq_residual_inf),
            ("ball_s_used", report.ball_s_used),
            ("ball_d_used", report.ball_d_used),
            ("stationarity", report.stationarity),
            ("wall_clock_seconds", report.wall_clock_seconds),
        ] {
            if !value.is_finite() {
                return Err(CliError::Numeric(format!("report field `{name}` is not finite")));
            }
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::OutputIo(e.to_string()))
    }
}
