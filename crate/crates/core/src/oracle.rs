//! Independent ground-truth generators: fixed-step RK4 simulation,
//! trajectory costing, the scalar Riccati integrator for linear-quadratic
//! problems, and brute-force enumeration of piecewise-constant controls.
//!
//! Everything here exists to be compared against, so it stays deliberately
//! simple and deterministic: fixed grids, fixed enumeration order, no
//! adaptivity.

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{FiniteProgram, ProblemSpec};
use crate::exprlang::{EvalError, Expr};
use crate::kernels;
use crate::occupation::{self, Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("step count must be even and at least 2, got {0}")]
    BadStepCount(usize),
    #[error("dynamics evaluation failed at t={t}: {source}")]
    Dynamics { t: f64, source: EvalError },
    #[error("cost evaluation failed: {0}")]
    Cost(#[from] EvalError),
    #[error("state became non-finite at node {node} (t={t})")]
    Blowup { node: usize, t: f64 },
    #[error("initial state has {got} entries, dynamics expect {expected}")]
    InitialStateLength { expected: usize, got: usize },
    #[error("dynamics signatures disagree: component {index} expects (n={n}, m={m})")]
    InconsistentSignature { index: usize, n: usize, m: usize },
    #[error("control provides {got} values, dynamics expect {expected}")]
    ControlArity { expected: usize, got: usize },
    #[error("piecewise control needs breakpoints [0, .., T] and one value row per segment")]
    BadPiecewiseControl,
    #[error("control expression must be a function of t alone")]
    ControlUsesStateOrControl,
    #[error(
        "enumeration guard: {levels}^({segments}*{m}) = {total} candidates exceeds 10^6"
    )]
    EnumerationGuard { levels: usize, segments: usize, m: usize, total: u128 },
    #[error("brute force needs at least one level and one segment")]
    EmptyEnumeration,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("occupation: {0}")]
    Occupation(#[from] crate::occupation::OccupationError),
}

/// An open-loop control signal: either constant on each of a list of
/// segments covering `[0, T]`, or a list of expressions of `t` alone.
#[derive(Debug, Clone, PartialEq)]
pub enum PiecewiseControl {
    Piecewise {
        /// `segments + 1` increasing times, first 0, last T.
        breakpoints: Vec<f64>,
        /// One value row per segment.
        values: Vec<Vec<f64>>,
    },
    Expressions(Vec<Expr>),
}

impl PiecewiseControl {
    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if breakpoints.len() < 2
            || values.len() + 1 != breakpoints.len()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(OracleError::BadPiecewiseControl);
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(OracleError::BadPiecewiseControl);
        }
        Ok(Self::Piecewise { breakpoints, values })
    }

    /// A single constant value over the whole horizon. An empty `value`
    /// gives the control for `m = 0` problems.
    pub fn constant(value: Vec<f64>, horizon: f64) -> Self {
        Self::Piecewise { breakpoints: vec![0.0, horizon], values: vec![value] }
    }

    /// Uniform segments over `[0, horizon]`.
    pub fn uniform_segments(values: Vec<Vec<f64>>, horizon: f64) -> Result<Self, OracleError> {
        let segments = values.len();
        if segments == 0 {
            return Err(OracleError::BadPiecewiseControl);
        }
        let breakpoints = (0..=segments)
            .map(|k| horizon * k as f64 / segments as f64)
            .collect();
        Self::piecewise(breakpoints, values)
    }

    /// One expression of `t` per control coordinate; the expressions must
    /// have the empty signature `(n=0, m=0)`.
    pub fn from_exprs(exprs: Vec<Expr>) -> Self {
        Self::Expressions(exprs)
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Self::Piecewise { values, .. } => values[0].len(),
            Self::Expressions(exprs) => exprs.len(),
        }
    }

    /// The control value at time `t`. Piecewise-constant signals are
    /// right-continuous; the final segment includes its right endpoint.
    pub fn eval_at(&self, t: f64) -> Result<Vec<f64>, OracleError> {
        self.eval_at_anchored(t, t)
    }

    /// Like [`PiecewiseControl::eval_at`], but a piecewise signal resolves
    /// breakpoint ambiguity toward the segment containing `anchor`. RK4
    /// steps anchor their stages at the step midpoint so a step that ends
    /// exactly on a breakpoint still integrates the segment it lives in.
    pub fn eval_at_anchored(&self, t: f64, anchor: f64) -> Result<Vec<f64>, OracleError> {
        match self {
            Self::Piecewise { breakpoints, values } => {
                let seg = match breakpoints[1..].iter().position(|&b| anchor < b) {
                    Some(k) => k,
                    None => values.len() - 1,
                };
                Ok(values[seg].clone())
            }
            Self::Expressions(exprs) => {
                let mut out = Vec::with_capacity(exprs.len());
                for e in exprs {
                    if e.state_dim() != 0 || e.control_dim() != 0 {
                        return Err(OracleError::ControlUsesStateOrControl);
                    }
                    out.push(e.eval(t, &[], &[]).map_err(|source| OracleError::Dynamics {
                        t,
                        source,
                    })?);
                }
                Ok(out)
            }
        }
    }
}

fn check_dynamics_signature(dynamics: &[Expr], x0: &[f64]) -> Result<(usize, usize), OracleError> {
    let n = x0.len();
    if dynamics.len() != n {
        return Err(OracleError::InitialStateLength { expected: dynamics.len(), got: n });
    }
    let m = dynamics.first().map_or(0, Expr::control_dim);
    for (index, f) in dynamics.iter().enumerate() {
        if f.state_dim() != n || f.control_dim() != m {
            return Err(OracleError::InconsistentSignature {
                index,
                n: f.state_dim(),
                m: f.control_dim(),
            });
        }
    }
    Ok((n, m))
}

/// Classical fixed-step RK4 for `xdot = f(t, x, u(t))` on the uniform grid
/// with the given even step count; states are stored at all `steps + 1`
/// nodes, controls are sampled at the nodes.
pub fn simulate(
    dynamics: &[Expr],
    x0: &[f64],
    control: &PiecewiseControl,
    horizon: f64,
    steps: usize,
) -> Result<Trajectory, OracleError> {
    if steps < 2 || steps % 2 != 0 {
        return Err(OracleError::BadStepCount(steps));
    }
    let (n, m) = check_dynamics_signature(dynamics, x0)?;
    if control.control_dim() != m {
        return Err(OracleError::ControlArity { expected: m, got: control.control_dim() });
    }
    let dt = horizon / steps as f64;
    // an overflowing dynamics evaluation is the first sign of finite-time
    // blowup; report it with the node like a non-finite state
    let eval_f = |t: f64, x: &[f64], u: &[f64], node: usize| -> Result<Vec<f64>, OracleError> {
        dynamics
            .iter()
            .map(|f| {
                f.eval(t, x, u).map_err(|source| match source {
                    EvalError::NonFinite { .. } => OracleError::Blowup { node, t },
                    other => OracleError::Dynamics { t, source: other },
                })
            })
            .collect()
    };
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    states.push(x.clone());
    controls.push(control.eval_at(0.0)?);
    for k in 0..steps {
        let t = horizon * k as f64 / steps as f64;
        let t_mid = t + 0.5 * dt;
        let t_next = horizon * (k + 1) as f64 / steps as f64;
        let u0 = control.eval_at_anchored(t, t_mid)?;
        let u_mid = control.eval_at_anchored(t_mid, t_mid)?;
        let u1 = control.eval_at_anchored(t_next, t_mid)?;
        let k1 = eval_f(t, &x, &u0, k + 1)?;
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(xi, ki)| xi + 0.5 * dt * ki).collect();
        let k2 = eval_f(t_mid, &x2, &u_mid, k + 1)?;
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(xi, ki)| xi + 0.5 * dt * ki).collect();
        let k3 = eval_f(t_mid, &x3, &u_mid, k + 1)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + dt * ki).collect();
        let k4 = eval_f(t_next, &x4, &u1, k + 1)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::Blowup { node: k + 1, t: t_next });
        }
        states.push(x.clone());
        controls.push(u1);
    }
    Ok(Trajectory::from_uniform(horizon, states, controls)?)
}

/// `integral h(t, x, u) dt + F(x(T))`. The terminal cost is a function of
/// the state alone and is evaluated at `(T, x(T))`.
pub fn trajectory_cost(
    traj: &Trajectory,
    running_cost: &Expr,
    terminal_cost: &Expr,
) -> Result<f64, OracleError> {
    let running = occupation::inner_with_function(running_cost, traj)?;
    let terminal = terminal_cost.eval(traj.horizon(), traj.terminal_state(), &[])?;
    Ok(running + terminal)
}

/// Exact optimal cost of the scalar linear-quadratic problem
/// `xdot = a x + bb u`, cost `integral (q x^2 + r u^2) dt`, zero terminal
/// cost: integrates the Riccati equation `-pdot = q + 2 a p - p^2 bb^2 / r`
/// with `p(T) = 0` backward by RK4 on 2000 steps and returns `p(0) x0^2`.
pub fn riccati_lq_cost(a: f64, bb: f64, q: f64, r: f64, horizon: f64, x0: f64) -> f64 {
    assert!(r > 0.0, "control weight must be positive");
    assert!(q >= 0.0, "state weight must be nonnegative");
    // substitute s = T - t so the terminal condition becomes an initial one
    let rhs = |p: f64| q + 2.0 * a * p - p * p * bb * bb / r;
    let steps = 2000;
    let ds = horizon / steps as f64;
    let mut p = 0.0;
    for _ in 0..steps {
        let k1 = rhs(p);
        let k2 = rhs(p + 0.5 * ds * k1);
        let k3 = rhs(p + 0.5 * ds * k2);
        let k4 = rhs(p + ds * k3);
        p += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    p * x0 * x0
}

/// Enumerate every piecewise-constant control with the given per-coordinate
/// levels and uniform segment count, simulate each with RK4, and return the
/// smallest trajectory cost together with its control. Ties go to the
/// earliest candidate in lexicographic level order.
pub fn brute_force_cost(
    spec: &ProblemSpec,
    levels: &[f64],
    segments: usize,
    steps_per_segment: usize,
) -> Result<(f64, PiecewiseControl), OracleError> {
    if levels.is_empty() || segments == 0 {
        return Err(OracleError::EmptyEnumeration);
    }
    let m = spec.control_dim();
    let digits = segments * m;
    let total = (levels.len() as u128).pow(digits as u32);
    if total > 1_000_000 {
        return Err(OracleError::EnumerationGuard {
            levels: levels.len(),
            segments,
            m,
            total,
        });
    }
    let steps = segments * steps_per_segment;
    if steps < 2 || steps % 2 != 0 {
        return Err(OracleError::BadStepCount(steps));
    }
    let mut best: Option<(f64, PiecewiseControl)> = None;
    // counting with the first digit most significant gives lexicographic
    // order over the flattened (segment, coordinate) level choices
    let mut index = vec![0usize; digits];
    loop {
        let values: Vec<Vec<f64>> = (0..segments)
            .map(|seg| (0..m).map(|j| levels[index[seg * m + j]]).collect())
            .collect();
        let control = PiecewiseControl::uniform_segments(values, spec.horizon())?;
        let traj = simulate(spec.dynamics(), spec.x0(), &control, spec.horizon(), steps)?;
        let cost = trajectory_cost(&traj, spec.running_cost(), spec.terminal_cost())?;
        match &best {
            Some((best_cost, _)) if cost >= *best_cost => {}
            _ => best = Some((cost, control)),
        }
        // increment, last digit fastest
        let mut pos = digits;
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one candidate"));
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < levels.len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Dense grid-search minimum of a finite program over the slack-relaxed
/// feasible set: every coordinate ranges over multiples of `step` inside
/// the ellipsoid bounding box, equality rows and ball constraints are
/// enforced within `slack`. Returns `None` when no grid point is feasible
/// or a Gram block is too ill-conditioned to bound the coordinates.
///
/// The last coordinate is enumerated only inside the interval the equality
/// rows allow, which is what keeps three-dimensional scans tractable; the
/// result is identical to the full scan. Desk-scale oracle: intended for
/// programs with at most three variables.
pub fn grid_search_min(p: &FiniteProgram, step: f64, slack: f64) -> Option<f64> {
    let d = p.num_s() + p.num_d();
    assert!(d >= 1, "empty program");
    let bound_for = |g: &nalgebra::DMatrix<f64>, r: f64| -> Option<f64> {
        if g.nrows() == 0 {
            return Some(0.0);
        }
        let min_eig = kernels::symmetric_eigenvalues(g)[0];
        if min_eig <= 1e-9 {
            return None;
        }
        Some(((r + slack) / min_eig).sqrt())
    };
    let bound_s = bound_for(p.gram_s(), p.radius_s())?;
    let bound_d = bound_for(p.gram_d(), p.radius_d())?;
    let bound = |i: usize| if i < p.num_s() { bound_s } else { bound_d };

    let steps_for = |b: f64| (b / step).floor() as i64;
    let outer_points: u128 = (0..d.saturating_sub(1))
        .map(|i| 2 * steps_for(bound(i)) as u128 + 1)
        .product();
    assert!(
        outer_points <= 50_000_000,
        "grid oracle asked to scan {outer_points} outer points; shrink the program"
    );

    let a = p.constraints();
    let b_rhs = p.rhs();
    let c = p.objective();
    let last = d - 1;
    let feasible = |z: &DVector<f64>| -> bool {
        for row in 0..a.nrows() {
            let mut dot = 0.0;
            for j in 0..d {
                dot += a[(row, j)] * z[j];
            }
            if (dot - b_rhs[row]).abs() > slack {
                return false;
            }
        }
        let w = DVector::from(z.rows(0, p.num_s()));
        if !w.is_empty() && (p.gram_s() * &w).dot(&w) > p.radius_s() + slack {
            return false;
        }
        let v = DVector::from(z.rows(p.num_s(), p.num_d()));
        if !v.is_empty() && (p.gram_d() * &v).dot(&v) > p.radius_d() + slack {
            return false;
        }
        true
    };

    let mut best: Option<f64> = None;
    let mut outer_idx = vec![-steps_for(bound(0)); last];
    for (i, oi) in outer_idx.iter_mut().enumerate() {
        *oi = -steps_for(bound(i));
    }
    let mut z = DVector::zeros(d);
    loop {
        for i in 0..last {
            z[i] = outer_idx[i] as f64 * step;
        }
        // interval for the last coordinate from the equality rows
        let mut lo = -bound(last);
        let mut hi = bound(last);
        let mut viable = true;
        for row in 0..a.nrows() {
            let mut partial = 0.0;
            for j in 0..last {
                partial += a[(row, j)] * z[j];
            }
            let coeff = a[(row, last)];
            if coeff.abs() > 1e-12 {
                let mut l = (b_rhs[row] - slack - partial) / coeff;
                let mut h = (b_rhs[row] + slack - partial) / coeff;
                if l > h {
                    std::mem::swap(&mut l, &mut h);
                }
                lo = lo.max(l);
                hi = hi.min(h);
            } else if (partial - b_rhs[row]).abs() > slack {
                viable = false;
                break;
            }
        }
        if viable && lo <= hi {
            let k_lo = (lo / step).ceil() as i64;
            let k_hi = (hi / step).floor() as i64;
            for k in k_lo..=k_hi {
                z[last] = k as f64 * step;
                if feasible(&z) {
                    let obj = c.dot(&z);
                    if best.is_none_or(|b| obj < b) {
                        best = Some(obj);
                    }
                }
            }
        }
        // advance the outer index vector, last coordinate fastest
        let mut pos = last;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            outer_idx[pos] += 1;
            if outer_idx[pos] <= steps_for(bound(pos)) {
                break;
            }
            outer_idx[pos] = -steps_for(bound(pos));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BoxDomain;
    use crate::kernels::KernelConfig;
    use approx::assert_relative_eq;

    fn parse(src: &str, n: usize, m: usize) -> Expr {
        Expr::parse(src, n, m).unwrap()
    }

    #[test]
    fn zero_dynamics_constant_trajectory() {
        let f = [parse("0", 1, 0)];
        let u = PiecewiseControl::constant(vec![], 1.0);
        let traj = simulate(&f, &[0.75], &u, 1.0, 10).unwrap();
        assert!(traj.states().iter().all(|x| x[0] == 0.75));
    }

    #[test]
    fn unit_control_integrates_exactly() {
        // RK4 is exact on polynomials of degree <= 4 in t
        let f = [parse("u1", 1, 1)];
        let u = PiecewiseControl::constant(vec![1.0], 1.0);
        let traj = simulate(&f, &[0.0], &u, 1.0, 4).unwrap();
        assert_eq!(traj.terminal_state()[0], 1.0);
    }

    #[test]
    fn exponential_growth_matches_e() {
        let f = [parse("x1", 1, 0)];
        let u = PiecewiseControl::constant(vec![], 1.0);
        let traj = simulate(&f, &[1.0], &u, 1.0, 1000).unwrap();
        assert!((traj.terminal_state()[0] - 2.718281828459045).abs() <= 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let f = [parse("x1", 1, 0)];
        let u = PiecewiseControl::constant(vec![], 1.0);
        let err = |steps: usize| {
            let traj = simulate(&f, &[1.0], &u, 1.0, steps).unwrap();
            (traj.terminal_state()[0] - std::f64::consts::E).abs()
        };
        let e1 = err(10);
        let e2 = err(20);
        assert!(e1 / e2 >= 12.0, "observed ratio {}", e1 / e2);
    }

    #[test]
    fn blowup_reports_first_bad_node() {
        let f = [parse("x1^2", 1, 0)];
        let u = PiecewiseControl::constant(vec![], 2.0);
        // xdot = x^2 from x0=1 blows up at t=1
        match simulate(&f, &[1.0], &u, 2.0, 100) {
            Err(OracleError::Blowup { node, .. }) => assert!(node > 0),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn costs_add_running_and_terminal() {
        let f = [parse("0", 1, 0)];
        let u = PiecewiseControl::constant(vec![], 2.0);
        let traj = simulate(&f, &[3.0], &u, 2.0, 10).unwrap();
        let one = parse("1", 1, 0);
        let zero = parse("0", 1, 0);
        let xsq = parse("x1^2", 1, 0);
        assert_relative_eq!(trajectory_cost(&traj, &one, &zero).unwrap(), 2.0);
        assert_relative_eq!(trajectory_cost(&traj, &zero, &xsq).unwrap(), 9.0);
    }

    #[test]
    fn riccati_closed_form_grid() {
        // p(t) = tanh(T - t) solves pdot = p^2 - 1, p(T) = 0, so the cost
        // is tanh(T) * x0^2
        for horizon in [0.5, 1.0, 2.0] {
            for x0 in [-1.0, 1.0] {
                let got = riccati_lq_cost(0.0, 1.0, 1.0, 1.0, horizon, x0);
                let want = horizon.tanh() * x0 * x0;
                assert!((got - want).abs() <= 1e-8, "T={horizon} x0={x0}: {got} vs {want}");
            }
        }
        assert_relative_eq!(
            riccati_lq_cost(0.0, 1.0, 1.0, 1.0, 1.0, 1.0),
            0.761594156,
            max_relative = 1e-8
        );
    }

    #[test]
    fn riccati_degenerate_cases() {
        assert_eq!(riccati_lq_cost(0.3, 1.0, 0.0, 1.0, 1.0, 1.0), 0.0);
        assert_eq!(riccati_lq_cost(0.3, 1.0, 1.0, 1.0, 1.0, 0.0), 0.0);
    }

    fn integrator_spec() -> ProblemSpec {
        ProblemSpec::new(
            1.0,
            vec![1.0],
            BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
            BoxDomain::new(vec![-1.0], vec![1.0]).unwrap(),
            BoxDomain::new(vec![-2.0], vec![2.0]).unwrap(),
            vec![parse("u1", 1, 1)],
            parse("x1^2", 1, 1),
            parse("0", 1, 0),
            KernelConfig::gaussian(1.0, 3).unwrap(),
            KernelConfig::gaussian(1.0, 2).unwrap(),
            KernelConfig::gaussian(1.0, 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn brute_force_hand_enumeration() {
        // 9 candidates; u = -1 on both segments drives x from 1 to 0
        // linearly, integral (1-t)^2 dt = 1/3
        let spec = integrator_spec();
        let (cost, control) = brute_force_cost(&spec, &[-1.0, 0.0, 1.0], 2, 100).unwrap();
        assert!((cost - 1.0 / 3.0).abs() <= 1e-6, "{cost}");
        match control {
            PiecewiseControl::Piecewise { values, .. } => {
                assert_eq!(values, vec![vec![-1.0], vec![-1.0]]);
            }
            other => panic!("unexpected control {other:?}"),
        }
    }

    #[test]
    fn brute_force_single_candidate() {
        let mut spec = integrator_spec();
        spec = ProblemSpec::new(
            1.0,
            vec![1.0],
            spec.x_box().clone(),
            spec.u_box().clone(),
            spec.d_box().clone(),
            vec![parse("0", 1, 1)],
            parse("x1^2", 1, 1),
            parse("0", 1, 0),
            *spec.kernel_s(),
            *spec.kernel_sigma(),
            *spec.kernel_d(),
        )
        .unwrap();
        let (cost, _) = brute_force_cost(&spec, &[0.0], 1, 10).unwrap();
        assert_relative_eq!(cost, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn brute_force_monotone_in_level_set() {
        let spec = integrator_spec();
        let (coarse, _) = brute_force_cost(&spec, &[-1.0, 1.0], 2, 50).unwrap();
        let (finer, _) = brute_force_cost(&spec, &[-1.0, -0.5, 0.0, 0.5, 1.0], 2, 50).unwrap();
        assert!(finer <= coarse + 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let spec = integrator_spec();
        let levels: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        assert!(matches!(
            brute_force_cost(&spec, &levels, 4, 10),
            Err(OracleError::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn piecewise_control_lookup() {
        let u = PiecewiseControl::piecewise(
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0], vec![-1.0]],
        )
        .unwrap();
        assert_eq!(u.eval_at(0.0).unwrap(), vec![1.0]);
        assert_eq!(u.eval_at(0.49).unwrap(), vec![1.0]);
        assert_eq!(u.eval_at(0.5).unwrap(), vec![-1.0]);
        assert_eq!(u.eval_at(1.0).unwrap(), vec![-1.0]);
    }
}
