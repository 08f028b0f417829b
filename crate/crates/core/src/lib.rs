//! Convert a finite-horizon nonlinear optimal control problem into a
//! finite-rank linear program over reproducing-kernel coefficient vectors,
//! and solve it under Hilbert-norm ball bounds.
//!
//! The pipeline:
//!
//! 1. [`exprlang`] parses user-supplied dynamics and cost expressions.
//! 2. [`kernels`] provides the radial kernel families (Gaussian, Wendland)
//!    with analytic first derivatives and Gram-matrix assembly.
//! 3. [`occupation`] computes occupation-kernel functionals by composite
//!    Simpson quadrature over sampled trajectories, including the
//!    adjoint-identity residual used as the end-to-end correctness probe.
//! 4. [`assembly`] places centers (Halton or grid), collocates the total
//!    derivative operator, and assembles the objective, constraint matrix,
//!    right-hand side, Gram blocks, and ball radii of the finite program.
//! 5. [`solver`] minimizes the linear objective subject to the equality
//!    constraints and the two Hilbert-norm ellipsoid bounds, with certified
//!    residual reporting.
//! 6. [`oracle`] supplies independent ground truth: RK4 simulation,
//!    trajectory costing, a scalar Riccati integrator, and brute-force
//!    control enumeration.

pub mod assembly;
pub mod exprlang;
pub mod halton;
pub mod kernels;
pub mod occupation;
pub mod oracle;
pub mod solver;

pub use assembly::{BoxDomain, CenterSet, CenterStrategy, FiniteProgram, ProblemSpec};
pub use exprlang::Expr;
pub use kernels::{KernelConfig, KernelFamily};
pub use occupation::Trajectory;
pub use oracle::PiecewiseControl;
pub use solver::{SolveOptions, SolveResult, SolveStatus};
