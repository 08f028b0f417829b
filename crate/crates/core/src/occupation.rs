//! Occupation-kernel functionals over sampled trajectories.
//!
//! A [`Trajectory`] stores a state/control signal pair on a uniform time
//! grid with an even number of steps, so every integral here is a composite
//! Simpson sum on the trajectory's own nodes. The module computes occupation
//! kernel evaluations, squared Hilbert norms, inner products with functions,
//! and the adjoint-identity residual
//! `| integral of (d/dt g + f . grad_x g) - (g(T,x(T)) - g(0,x(0))) |`,
//! which vanishes at the quadrature's rate when the trajectory solves
//! `xdot = f` and is this crate's strongest end-to-end correctness probe.

use std::io::{Read, Write};

use thiserror::Error;

use crate::assembly::BoxDomain;
use crate::exprlang::{EvalError, Expr};
use crate::kernels::{KernelConfig, KernelError};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least 3 nodes (2 steps), got {0}")]
    TooFewNodes(usize),
    #[error("step count must be even for composite Simpson, got {0}")]
    OddStepCount(usize),
    #[error("time grid is not uniform at node {node}: expected {expected}, got {got}")]
    NonUniformGrid { node: usize, expected: f64, got: f64 },
    #[error("time grid must start at 0, got {0}")]
    NonZeroStart(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("node {node} has {got} state/control values, expected {expected}")]
    LengthMismatch { node: usize, expected: usize, got: usize },
    #[error("row count mismatch: {times} times, {states} state rows, {controls} control rows")]
    RowCountMismatch { times: usize, states: usize, controls: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("state at node {node} leaves the state box in coordinate {coordinate}")]
    StateOutsideDomain { node: usize, coordinate: usize },
    #[error("control at node {node} leaves the control box in coordinate {coordinate}")]
    ControlOutsideDomain { node: usize, coordinate: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv header must read t,x1..xn,u1..um, got `{0}`")]
    BadHeader(String),
    #[error("csv field `{field}` at row {row} is not a number")]
    BadField { row: usize, field: String },
}

#[derive(Debug, Error)]
pub enum OccupationError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("kernel dimension {kernel_dim} does not match trajectory layout {expected}")]
    KernelDimMismatch { kernel_dim: usize, expected: usize },
    #[error("dynamics list has {got} entries, trajectory has {expected} states")]
    DynamicsArity { expected: usize, got: usize },
    #[error("center has length {got}, expected {expected}")]
    CenterLength { expected: usize, got: usize },
    #[error("node range [{first}, {last}] is not a valid even-length span")]
    BadNodeRange { first: usize, last: usize },
}

/// A sampled state/control signal pair on the uniform grid
/// `t_k = k * T / N`, `k = 0..=N`, with `N` even.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    horizon: f64,
}

impl Trajectory {
    /// Build from explicit node times; the grid must be uniform within
    /// `1e-12 * T` and start at zero.
    pub fn new(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        controls: Vec<Vec<f64>>,
    ) -> Result<Self, TrajectoryError> {
        if times.len() != states.len() || times.len() != controls.len() {
            return Err(TrajectoryError::RowCountMismatch {
                times: times.len(),
                states: states.len(),
                controls: controls.len(),
            });
        }
        if times.len() < 3 {
            return Err(TrajectoryError::TooFewNodes(times.len()));
        }
        let steps = times.len() - 1;
        if steps % 2 != 0 {
            return Err(TrajectoryError::OddStepCount(steps));
        }
        let horizon = *times.last().expect("nonempty");
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(TrajectoryError::BadHorizon(horizon));
        }
        if times[0].abs() > 1e-12 * horizon {
            return Err(TrajectoryError::NonZeroStart(times[0]));
        }
        let dt = horizon / steps as f64;
        for (k, &t) in times.iter().enumerate() {
            let expected = k as f64 * dt;
            if (t - expected).abs() > 1e-12 * horizon {
                return Err(TrajectoryError::NonUniformGrid { node: k, expected, got: t });
            }
        }
        let n = states[0].len();
        let m = controls[0].len();
        for (k, (x, u)) in states.iter().zip(&controls).enumerate() {
            if x.len() != n {
                return Err(TrajectoryError::LengthMismatch { node: k, expected: n, got: x.len() });
            }
            if u.len() != m {
                return Err(TrajectoryError::LengthMismatch { node: k, expected: m, got: u.len() });
            }
            if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
                return Err(TrajectoryError::NonFinite(k));
            }
        }
        Ok(Self { times, states, controls, horizon })
    }

    /// Build on the canonical uniform grid for the given horizon.
    pub fn from_uniform(
        horizon: f64,
        states: Vec<Vec<f64>>,
        controls: Vec<Vec<f64>>,
    ) -> Result<Self, TrajectoryError> {
        if states.len() < 3 {
            return Err(TrajectoryError::TooFewNodes(states.len()));
        }
        let steps = states.len() - 1;
        let times = (0..=steps)
            .map(|k| horizon * k as f64 / steps as f64)
            .collect();
        Self::new(times, states, controls)
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn control_dim(&self) -> usize {
        self.controls[0].len()
    }

    /// Number of steps `N`; there are `N + 1` nodes.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.states.last().expect("nonempty")
    }

    /// The concatenated point `(t_k, x_k, u_k)` in `S`.
    pub fn node_point(&self, k: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 + self.state_dim() + self.control_dim());
        p.push(self.times[k]);
        p.extend_from_slice(&self.states[k]);
        p.extend_from_slice(&self.controls[k]);
        p
    }

    /// Optional domain check: every state inside `x_box`, every control
    /// inside `u_box` (boundaries inclusive).
    pub fn check_in_boxes(
        &self,
        x_box: &BoxDomain,
        u_box: &BoxDomain,
    ) -> Result<(), TrajectoryError> {
        for k in 0..self.times.len() {
            if let Some(coordinate) = x_box.first_violation(&self.states[k]) {
                return Err(TrajectoryError::StateOutsideDomain { node: k, coordinate });
            }
            if let Some(coordinate) = u_box.first_violation(&self.controls[k]) {
                return Err(TrajectoryError::ControlOutsideDomain { node: k, coordinate });
            }
        }
        Ok(())
    }

    /// Export as CSV with header `t,x1..xn,u1..um`, one row per node.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TrajectoryError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.state_dim()).map(|i| format!("x{i}")));
        header.extend((1..=self.control_dim()).map(|i| format!("u{i}")));
        w.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v}")));
            row.extend(self.controls[k].iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Import the CSV format written by [`Trajectory::write_csv`]. The
    /// header determines the state and control dimensions.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TrajectoryError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"t") {
            return Err(TrajectoryError::BadHeader(cols.join(",")));
        }
        let n = cols.iter().filter(|c| c.starts_with('x')).count();
        let m = cols.iter().filter(|c| c.starts_with('u')).count();
        let expected: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .chain((1..=m).map(|i| format!("u{i}")))
            .collect();
        if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(TrajectoryError::BadHeader(cols.join(",")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut controls = Vec::new();
        for (row_idx, record) in r.records().enumerate() {
            let record = record?;
            let parse = |field: &str| -> Result<f64, TrajectoryError> {
                field.trim().parse().map_err(|_| TrajectoryError::BadField {
                    row: row_idx + 1,
                    field: field.to_string(),
                })
            };
            let fields: Vec<&str> = record.iter().collect();
            if fields.len() != 1 + n + m {
                return Err(TrajectoryError::LengthMismatch {
                    node: row_idx,
                    expected: 1 + n + m,
                    got: fields.len(),
                });
            }
            times.push(parse(fields[0])?);
            states.push(fields[1..1 + n].iter().map(|f| parse(f)).collect::<Result<_, _>>()?);
            controls.push(
                fields[1 + n..].iter().map(|f| parse(f)).collect::<Result<_, _>>()?,
            );
        }
        Self::new(times, states, controls)
    }
}

/// Composite Simpson weights for `steps + 1` nodes with spacing `dt`.
pub(crate) fn simpson_weights(steps: usize, dt: f64) -> Vec<f64> {
    debug_assert!(steps >= 2 && steps % 2 == 0);
    let mut w = vec![0.0; steps + 1];
    let third = dt / 3.0;
    w[0] = third;
    w[steps] = third;
    for (k, wk) in w.iter_mut().enumerate().take(steps).skip(1) {
        *wk = if k % 2 == 1 { 4.0 * third } else { 2.0 * third };
    }
    w
}

/// Simpson weights on the trajectory's own grid; exposed so callers can
/// build empirical coefficient vectors from trajectory nodes.
pub fn trajectory_simpson_weights(traj: &Trajectory) -> Vec<f64> {
    simpson_weights(traj.steps(), traj.horizon() / traj.steps() as f64)
}

fn check_s_kernel(k_s: &KernelConfig, traj: &Trajectory) -> Result<(), OccupationError> {
    let expected = 1 + traj.state_dim() + traj.control_dim();
    if k_s.dim() != expected {
        return Err(OccupationError::KernelDimMismatch { kernel_dim: k_s.dim(), expected });
    }
    Ok(())
}

fn check_sigma_kernel(k_sigma: &KernelConfig, traj: &Trajectory) -> Result<(), OccupationError> {
    let expected = 1 + traj.state_dim();
    if k_sigma.dim() != expected {
        return Err(OccupationError::KernelDimMismatch {
            kernel_dim: k_sigma.dim(),
            expected,
        });
    }
    Ok(())
}

/// The occupation kernel evaluated at `y`:
/// Simpson approximation of `integral_0^T K_S(y, (t, x(t), u(t))) dt`.
pub fn occupation_eval(
    k_s: &KernelConfig,
    traj: &Trajectory,
    y: &[f64],
) -> Result<f64, OccupationError> {
    check_s_kernel(k_s, traj)?;
    if y.len() != k_s.dim() {
        return Err(OccupationError::CenterLength { expected: k_s.dim(), got: y.len() });
    }
    let weights = trajectory_simpson_weights(traj);
    let mut acc = 0.0;
    for k in 0..=traj.steps() {
        let p = traj.node_point(k);
        acc += weights[k] * k_s.eval(y, &p)?;
    }
    Ok(acc)
}

/// Squared Hilbert norm of the occupation kernel: double Simpson
/// approximation of the double integral of
/// `K_S((tau, x(tau), u(tau)), (t, x(t), u(t)))`.
///
/// Because the node weights are positive and sum to `T` while the kernel is
/// bounded by `phi0`, the value can never exceed `T^2 * phi0` beyond
/// rounding.
pub fn occupation_norm_sq(k_s: &KernelConfig, traj: &Trajectory) -> Result<f64, OccupationError> {
    check_s_kernel(k_s, traj)?;
    let weights = trajectory_simpson_weights(traj);
    let nodes: Vec<Vec<f64>> = (0..=traj.steps()).map(|k| traj.node_point(k)).collect();
    let mut acc = 0.0;
    for i in 0..nodes.len() {
        // diagonal once, off-diagonal mirrored
        acc += weights[i] * weights[i] * k_s.phi0();
        for j in (i + 1)..nodes.len() {
            acc += 2.0 * weights[i] * weights[j] * k_s.eval(&nodes[i], &nodes[j])?;
        }
    }
    Ok(acc)
}

/// Simpson approximation of `integral_0^T h(t, x(t), u(t)) dt`, the pairing
/// of `h` with the occupation kernel.
pub fn inner_with_function(h: &Expr, traj: &Trajectory) -> Result<f64, OccupationError> {
    let weights = trajectory_simpson_weights(traj);
    let mut acc = 0.0;
    for k in 0..=traj.steps() {
        acc += weights[k] * h.eval(traj.times()[k], &traj.states()[k], &traj.controls()[k])?;
    }
    Ok(acc)
}

/// Simpson approximation of the total-derivative pairing
/// `integral [d/dt g + f . grad_x g](t, x(t), u(t)) dt` where
/// `g = K_Sigma(., center)`, restricted to the node span `[first, last]`.
///
/// `last - first` must be even. The full span is `[0, steps]`. The
/// restricted spans let a caller integrate piecewise-smooth signals segment
/// by segment and sum, keeping the quadrature at full order across control
/// discontinuities.
pub fn total_derivative_integral_over(
    k_sigma: &KernelConfig,
    dynamics: &[Expr],
    traj: &Trajectory,
    center: &[f64],
    first: usize,
    last: usize,
) -> Result<f64, OccupationError> {
    total_derivative_integral_impl(k_sigma, dynamics, traj, center, first, last, None)
}

/// Segment variant for piecewise-constant controls: the stored node
/// controls are right-continuous, so the right endpoint of an interior
/// segment carries the next segment's value; passing the segment's own
/// constant control keeps the quadrature at full order.
pub fn total_derivative_integral_segment(
    k_sigma: &KernelConfig,
    dynamics: &[Expr],
    traj: &Trajectory,
    center: &[f64],
    first: usize,
    last: usize,
    control: &[f64],
) -> Result<f64, OccupationError> {
    total_derivative_integral_impl(k_sigma, dynamics, traj, center, first, last, Some(control))
}

fn total_derivative_integral_impl(
    k_sigma: &KernelConfig,
    dynamics: &[Expr],
    traj: &Trajectory,
    center: &[f64],
    first: usize,
    last: usize,
    constant_control: Option<&[f64]>,
) -> Result<f64, OccupationError> {
    check_sigma_kernel(k_sigma, traj)?;
    if center.len() != k_sigma.dim() {
        return Err(OccupationError::CenterLength {
            expected: k_sigma.dim(),
            got: center.len(),
        });
    }
    if dynamics.len() != traj.state_dim() {
        return Err(OccupationError::DynamicsArity {
            expected: traj.state_dim(),
            got: dynamics.len(),
        });
    }
    if last <= first || last > traj.steps() || (last - first) % 2 != 0 {
        return Err(OccupationError::BadNodeRange { first, last });
    }
    let dt = traj.horizon() / traj.steps() as f64;
    let weights = simpson_weights(last - first, dt);
    let n = traj.state_dim();
    let mut acc = 0.0;
    let mut tx = vec![0.0; 1 + n];
    for k in first..=last {
        let t = traj.times()[k];
        let x = &traj.states()[k];
        let u = constant_control.unwrap_or(&traj.controls()[k]);
        tx[0] = t;
        tx[1..].copy_from_slice(x);
        let grad = k_sigma.grad_first(&tx, center)?;
        let mut integrand = grad[0];
        for (i, f_i) in dynamics.iter().enumerate() {
            integrand += f_i.eval(t, x, u)? * grad[1 + i];
        }
        acc += weights[k - first] * integrand;
    }
    Ok(acc)
}

/// Full-span total-derivative pairing; see
/// [`total_derivative_integral_over`].
pub fn total_derivative_integral(
    k_sigma: &KernelConfig,
    dynamics: &[Expr],
    traj: &Trajectory,
    center: &[f64],
) -> Result<f64, OccupationError> {
    total_derivative_integral_over(k_sigma, dynamics, traj, center, 0, traj.steps())
}

/// The adjoint-identity residual for `g = K_Sigma(., center)`:
/// `| Simpson(integral of A_f g along the trajectory) - (g(T, x(T)) - g(0, x(0))) |`.
///
/// For a trajectory that solves `xdot = f` this tends to zero at fourth
/// order as the grid refines.
pub fn adjoint_identity_residual(
    k_sigma: &KernelConfig,
    dynamics: &[Expr],
    traj: &Trajectory,
    center: &[f64],
) -> Result<f64, OccupationError> {
    let integral = total_derivative_integral(k_sigma, dynamics, traj, center)?;
    let boundary = boundary_difference(k_sigma, traj, center)?;
    Ok((integral - boundary).abs())
}

/// `g(T, x(T)) - g(0, x(0))` for `g = K_Sigma(., center)`.
pub fn boundary_difference(
    k_sigma: &KernelConfig,
    traj: &Trajectory,
    center: &[f64],
) -> Result<f64, OccupationError> {
    check_sigma_kernel(k_sigma, traj)?;
    let n = traj.state_dim();
    let mut tx_end = vec![0.0; 1 + n];
    tx_end[0] = traj.horizon();
    tx_end[1..].copy_from_slice(traj.terminal_state());
    let mut tx_start = vec![0.0; 1 + n];
    tx_start[1..].copy_from_slice(&traj.states()[0]);
    Ok(k_sigma.eval(&tx_end, center)? - k_sigma.eval(&tx_start, center)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn constant_traj(horizon: f64, steps: usize, x0: Vec<f64>, u0: Vec<f64>) -> Trajectory {
        let states = vec![x0; steps + 1];
        let controls = vec![u0; steps + 1];
        Trajectory::from_uniform(horizon, states, controls).unwrap()
    }

    /// x(t) = t, u = 0 on [0, 1].
    fn line_traj(steps: usize) -> Trajectory {
        let states = (0..=steps).map(|k| vec![k as f64 / steps as f64]).collect();
        let controls = vec![vec![0.0]; steps + 1];
        Trajectory::from_uniform(1.0, states, controls).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_grids() {
        let x = vec![vec![0.0]; 4];
        let u = vec![vec![]; 4];
        // 3 steps: odd
        assert!(matches!(
            Trajectory::from_uniform(1.0, x.clone(), u.clone()),
            Err(TrajectoryError::OddStepCount(3))
        ));
        assert!(matches!(
            Trajectory::new(vec![0.0, 0.1, 0.9], vec![vec![0.0]; 3], vec![vec![]; 3]),
            Err(TrajectoryError::NonUniformGrid { .. })
        ));
        assert!(matches!(
            Trajectory::from_uniform(1.0, vec![vec![0.0]; 2], vec![vec![]; 2]),
            Err(TrajectoryError::TooFewNodes(2))
        ));
        assert!(matches!(
            Trajectory::from_uniform(
                1.0,
                vec![vec![0.0], vec![f64::NAN], vec![0.0]],
                vec![vec![]; 3]
            ),
            Err(TrajectoryError::NonFinite(1))
        ));
    }

    #[test]
    fn occupation_eval_flat_kernel_approaches_horizon() {
        // with a near-flat Gaussian the kernel is ~1 along the trajectory,
        // so the integral approaches T
        let traj = constant_traj(2.0, 40, vec![0.5], vec![-0.25]);
        let k = KernelConfig::gaussian(1e6, 3).unwrap();
        let y = vec![0.0, 0.5, -0.25];
        let v = occupation_eval(&k, &traj, &y).unwrap();
        assert!((v - 2.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn occupation_eval_pinned_regression() {
        // independent 20001-node composite-Simpson oracle, computed before
        // the build: integral_0^1 exp(-2 t^2) dt
        let traj = line_traj(400);
        let k = KernelConfig::gaussian(1.0, 3).unwrap();
        let v = occupation_eval(&k, &traj, &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(v, 0.5981440066613025, max_relative = 1e-9);
    }

    #[test]
    fn norm_sq_constant_trajectory_is_horizon_squared() {
        // the integrand still sees the time coordinate, so "kernel = 1
        // along the trajectory" needs a flat length scale
        let traj = constant_traj(2.0, 16, vec![1.0, -1.0], vec![]);
        let k = KernelConfig::gaussian(1e12, 3).unwrap();
        let v = occupation_norm_sq(&k, &traj).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn norm_sq_pinned_regression() {
        // 4001 x 4001 trapezoid oracle, computed before the build:
        // double integral of exp(-2 (tau - t)^2) over the unit square.
        // The oracle itself carries ~2e-8 error, hence the tolerance.
        let traj = line_traj(400);
        let k = KernelConfig::gaussian(1.0, 3).unwrap();
        let v = occupation_norm_sq(&k, &traj).unwrap();
        assert!((v - 0.7639556369270647).abs() <= 5e-8, "{v}");
    }

    #[test]
    fn norm_sq_respects_paper_bound() {
        let traj = line_traj(200);
        let k = KernelConfig::gaussian(1.0, 3).unwrap();
        let v = occupation_norm_sq(&k, &traj).unwrap();
        assert!(v <= 1.0 + 1e-8);
    }

    #[test]
    fn inner_with_constant_function() {
        let traj = constant_traj(2.0, 10, vec![0.0], vec![]);
        let one = Expr::parse("1", 1, 0).unwrap();
        assert_relative_eq!(
            inner_with_function(&one, &traj).unwrap(),
            2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn inner_with_time_integrates_exactly() {
        // Simpson is exact on polynomials of degree <= 3
        let traj = line_traj(8);
        let t_expr = Expr::parse("t", 1, 1).unwrap();
        assert_relative_eq!(
            inner_with_function(&t_expr, &traj).unwrap(),
            0.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn inner_matches_riccati_on_lq_feedback() {
        // closed-loop xdot = -tanh(1-t) x is the LQ optimal feedback for
        // xdot = u with cost integral(x^2 + u^2); its cost is tanh(1)
        let n_steps = 400;
        let f = [Expr::parse("-tanh(1-t)*x1", 1, 0).unwrap()];
        let u_none = oracle::PiecewiseControl::constant(vec![], 1.0);
        let closed = oracle::simulate(&f, &[1.0], &u_none, 1.0, n_steps).unwrap();
        // rebuild as an (n=1, m=1) trajectory with u reconstructed from x
        let states = closed.states().to_vec();
        let controls: Vec<Vec<f64>> = closed
            .times()
            .iter()
            .zip(closed.states())
            .map(|(t, x)| vec![-(1.0 - t).tanh() * x[0]])
            .collect();
        let traj = Trajectory::from_uniform(1.0, states, controls).unwrap();
        let h = Expr::parse("x1^2+u1^2", 1, 1).unwrap();
        let cost = inner_with_function(&h, &traj).unwrap();
        let expected = oracle::riccati_lq_cost(0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((cost - expected).abs() <= 2e-3, "{cost} vs {expected}");
    }

    #[test]
    fn norm_sq_self_consistency() {
        // the double integral computed two ways: once by the dedicated
        // routine, once as Simpson of t -> occupation_eval at the
        // trajectory's own points
        let traj = line_traj(60);
        let k = KernelConfig::gaussian(0.8, 3).unwrap();
        let direct = occupation_norm_sq(&k, &traj).unwrap();
        let weights = trajectory_simpson_weights(&traj);
        let mut outer = 0.0;
        for j in 0..=traj.steps() {
            let y = traj.node_point(j);
            outer += weights[j] * occupation_eval(&k, &traj, &y).unwrap();
        }
        assert_relative_eq!(direct, outer, max_relative = 1e-6);
    }

    #[test]
    fn reproducing_consistency_for_kernel_expansions() {
        // h = sum_j a_j K_S(., y_j) pairs with the occupation kernel as
        // sum_j a_j * occupation_eval(y_j)
        let traj = line_traj(40);
        let k = KernelConfig::gaussian(0.9, 3).unwrap();
        let centers = [vec![0.2, 0.1, 0.0], vec![0.7, 0.4, 0.0], vec![0.9, 0.9, 0.0]];
        let coeff = [0.5, -1.25, 2.0];
        let weights = trajectory_simpson_weights(&traj);
        let mut direct = 0.0; // Simpson of h along the trajectory
        for i in 0..=traj.steps() {
            let p = traj.node_point(i);
            let h_at: f64 = centers
                .iter()
                .zip(coeff)
                .map(|(c, a)| a * k.eval(&p, c).unwrap())
                .sum();
            direct += weights[i] * h_at;
        }
        let via_occ: f64 = centers
            .iter()
            .zip(coeff)
            .map(|(c, a)| a * occupation_eval(&k, &traj, c).unwrap())
            .sum();
        assert_relative_eq!(direct, via_occ, max_relative = 1e-8);
    }

    #[test]
    fn adjoint_residual_zero_dynamics() {
        // f = 0 and a constant trajectory: the integrand is an exact time
        // derivative of a smooth function, only Simpson error remains
        let traj = constant_traj(1.0, 400, vec![0.3], vec![]);
        let k = KernelConfig::gaussian(1.0, 2).unwrap();
        let f = [Expr::parse("0", 1, 0).unwrap()];
        for center in [[0.5, 0.3], [0.1, -0.4], [0.9, 1.0]] {
            let r = adjoint_identity_residual(&k, &f, &traj, &center).unwrap();
            assert!(r <= 1e-10, "residual {r} for center {center:?}");
        }
    }

    #[test]
    fn adjoint_residual_fourth_order_refinement() {
        // xdot = -x + u with u(t) = sin t; residual calibrated by a
        // refinement study before pinning the 1e-4 threshold
        let f = [Expr::parse("-x1+u1", 1, 1).unwrap()];
        let u =
            oracle::PiecewiseControl::from_exprs(vec![Expr::parse("sin(t)", 0, 0).unwrap()]);
        let k = KernelConfig::gaussian(1.0, 2).unwrap();
        let centers = [[0.2, 0.5], [0.8, 0.9], [0.5, 0.1], [0.0, 1.0]];
        let run = |steps: usize| -> f64 {
            let traj = oracle::simulate(&f, &[1.0], &u, 1.0, steps).unwrap();
            centers
                .iter()
                .map(|c| adjoint_identity_residual(&k, &f, &traj, c).unwrap())
                .fold(0.0, f64::max)
        };
        let r400 = run(400);
        let r800 = run(800);
        assert!(r400 <= 1e-4, "max residual {r400}");
        assert!(r800 <= r400 / 8.0, "no fourth-order decay: {r400} -> {r800}");
    }

    #[test]
    fn csv_round_trip() {
        let traj = line_traj(4);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,u1\n"), "{text}");
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "time,x1\n0,0\n0.5,1\n1,2\n";
        assert!(matches!(
            Trajectory::read_csv(text.as_bytes()),
            Err(TrajectoryError::BadHeader(_))
        ));
    }

    #[test]
    fn kernel_dim_mismatch_detected() {
        let traj = line_traj(4);
        let wrong = KernelConfig::gaussian(1.0, 5).unwrap();
        assert!(matches!(
            occupation_eval(&wrong, &traj, &[0.0; 5]),
            Err(OccupationError::KernelDimMismatch { .. })
        ));
    }
}
