use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use okoc_cli::commands::{
    cmd_oracle, cmd_solve, cmd_validate, OracleArgs, SolveArgs, ValidateArgs,
};

#[derive(Parser)]
#[command(
    name = "okoc",
    about = "Occupation-kernel lifting of finite-horizon optimal control problems",
    long_about = "Converts a nonlinear optimal control problem into a finite-rank linear \
                  program over reproducing-kernel coefficient vectors, solves it under \
                  Hilbert-norm ball bounds, and validates the construction against \
                  independent numerical oracles."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and solve the finite program; writes a JSON report.
    Solve {
        /// Problem file (JSON).
        problem: PathBuf,
        /// Report path (default: <problem>.report.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the center seed from the problem file.
        #[arg(long)]
        seed: Option<u64>,
        /// Include the coefficient vectors w and v in the report.
        #[arg(long)]
        emit_weights: bool,
        /// Write center-scatter CSV series into this directory.
        #[arg(long, value_name = "DIR")]
        emit_plot_data: Option<PathBuf>,
    },
    /// Check the adjoint identity and the occupation-norm bound on random
    /// piecewise-constant-control trajectories; writes a residual table.
    Validate {
        problem: PathBuf,
        /// Residual table path (default: <problem>.validate.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the RNG seed (default: the problem file's center seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random controls to simulate.
        #[arg(long, default_value_t = 20)]
        trajectories: usize,
        /// Random test-function centers per trajectory.
        #[arg(long, default_value_t = 50)]
        sigma_samples: usize,
        /// Simulation/quadrature steps (must split evenly into segments).
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Piecewise-constant control segments per trajectory.
        #[arg(long, default_value_t = 5)]
        segments: usize,
        /// Threshold for the adjoint-identity residual.
        #[arg(long, default_value_t = 1e-4)]
        adjoint_tol: f64,
        /// Write residual histogram CSV into this directory.
        #[arg(long, value_name = "DIR")]
        emit_plot_data: Option<PathBuf>,
    },
    /// Ground-truth costs: Riccati for scalar LQ, or brute-force
    /// enumeration of piecewise-constant controls.
    Oracle {
        problem: PathBuf,
        /// Table path (default: <problem>.oracle.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scalar LQ Riccati oracle: key=value pairs among a, b, q, r.
        #[arg(long, num_args = 0.., value_name = "KEY=VALUE")]
        riccati: Option<Vec<String>>,
        /// Brute-force oracle: levels=v1,v2,.. segments=N
        /// steps_per_segment=N.
        #[arg(long, num_args = 0.., value_name = "KEY=VALUE")]
        brute: Option<Vec<String>>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version are not usage errors
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(64);
        }
    };
    let code = match cli.command {
        Command::Solve { problem, out, seed, emit_weights, emit_plot_data } => {
            match cmd_solve(&SolveArgs { problem, out, seed, emit_weights, emit_plot_data }) {
                Ok(outcome) => {
                    println!("{}", outcome.report_path.display());
                    eprintln!(
                        "status {}: objective {}",
                        outcome.report.status, outcome.report.objective
                    );
                    outcome.exit_code
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    err.exit_code()
                }
            }
        }
        Command::Validate {
            problem,
            out,
            seed,
            trajectories,
            sigma_samples,
            steps,
            segments,
            adjoint_tol,
            emit_plot_data,
        } => {
            match cmd_validate(&ValidateArgs {
                problem,
                out,
                seed,
                trajectories,
                sigma_samples,
                steps,
                segments,
                adjoint_tol,
                emit_plot_data,
            }) {
                Ok(outcome) => {
                    println!("{}", outcome.table_path.display());
                    eprintln!(
                        "max adjoint residual {}; all checks passed: {}",
                        outcome.max_adjoint_residual, outcome.all_passed
                    );
                    outcome.exit_code
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    err.exit_code()
                }
            }
        }
        Command::Oracle { problem, out, riccati, brute } => {
            match cmd_oracle(&OracleArgs { problem, out, riccati, brute }) {
                Ok(outcome) => {
                    println!("{}", outcome.table_path.display());
                    eprintln!("oracle cost {}", outcome.cost);
                    outcome.exit_code
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    err.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
