//! Solve the finite program: minimize `c . z` subject to `A z = b` and the
//! two Hilbert-norm ellipsoid bounds `w' G_S w <= r_S`, `v' G_D v <= r_D`.
//!
//! Method: an augmented-Lagrangian outer loop on the equality constraints
//! with an inner accelerated projected-gradient method over the ellipsoid
//! intersection. The two balls live on disjoint coordinate blocks, so the
//! joint projection splits into two independent ellipsoid projections, each
//! computed from a cached eigendecomposition and a safeguarded scalar
//! Newton solve on the multiplier.
//!
//! Near-duplicate test functions make `A` rank deficient; a modified
//! Gram-Schmidt preprocessing pass drops rows whose orthogonalized norm
//! falls below 1e-10 and reports them. All residuals in the result are
//! recomputed against the full, undropped system.
//!
//! Everything is deterministic: fixed iteration order, no randomized
//! pivoting, and the inner accelerated method is safeguarded so the merit
//! value of each outer iteration never increases.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::assembly::FiniteProgram;
use crate::kernels;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("{field} must be positive, got {value}")]
    BadOption { field: &'static str, value: f64 },
    #[error("penalty growth must exceed 1, got {0}")]
    BadGrowth(f64),
    #[error("gram matrix for the {space} block is not numerically PSD after jitter (min eigenvalue {min_eig})")]
    GramNotPsd { space: &'static str, min_eig: f64 },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Target for the equality residual in the sup norm.
    pub eq_tol: f64,
    /// Target for the projected-gradient stationarity measure.
    pub stat_tol: f64,
    /// Total inner-iteration budget.
    pub max_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eq_tol: 1e-6,
            stat_tol: 1e-6,
            max_iters: 50_000,
            penalty_init: 1.0,
            penalty_growth: 10.0,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        for (field, value) in [
            ("eq_tol", self.eq_tol),
            ("stat_tol", self.stat_tol),
            ("penalty_init", self.penalty_init),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SolveError::BadOption { field, value });
            }
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth > 1.0) {
            return Err(SolveError::BadGrowth(self.penalty_growth));
        }
        if self.max_iters == 0 {
            return Err(SolveError::BadOption { field: "max_iters", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    ToleranceNotMet,
    Infeasible,
}

/// Per-outer-iteration record: the merit is the augmented Lagrangian at
/// that iteration's fixed multipliers and penalty, measured before and
/// after the inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterTrace {
    pub merit_start: f64,
    pub merit_end: f64,
    pub eq_residual_inf: f64,
    pub penalty: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub objective: f64,
    pub eq_residual_inf: f64,
    /// `w' G_S w / r_S`.
    pub ball_s_used: f64,
    /// `v' G_D v / r_D`.
    pub ball_d_used: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Multiplier estimates for the full equality system; dropped rows
    /// carry zero.
    pub eq_multipliers: DVector<f64>,
    pub ball_multiplier_s: f64,
    pub ball_multiplier_d: f64,
    /// Rows removed by the rank-revealing preprocessing pass.
    pub dropped_rows: Vec<usize>,
    pub outer_trace: Vec<OuterTrace>,
}

impl SolveResult {
    pub fn z(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.w.len() + self.v.len());
        z.rows_mut(0, self.w.len()).copy_from(&self.w);
        z.rows_mut(self.w.len(), self.v.len()).copy_from(&self.v);
        z
    }
}

/// Euclidean projection onto `{ y : y' G y <= r }`, precomputed from one
/// symmetric eigendecomposition of the jittered Gram matrix.
pub struct EllipsoidProjector {
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    radius: f64,
}

impl EllipsoidProjector {
    pub fn new(gram: &DMatrix<f64>, radius: f64) -> Result<Self, SolveError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(SolveError::BadOption { field: "radius", value: radius });
        }
        if gram.nrows() == 0 {
            return Ok(Self {
                eigvecs: DMatrix::zeros(0, 0),
                eigvals: DVector::zeros(0),
                radius,
            });
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFiniteInput);
        }
        let jittered = kernels::jittered(gram);
        let scale = jittered[(0, 0)].abs().max(1.0);
        let eigen = jittered.symmetric_eigen();
        let min_eig = eigen.eigenvalues.min();
        if min_eig < -1e-8 * scale {
            return Err(SolveError::GramNotPsd { space: "supplied", min_eig });
        }
        let eigvals = eigen.eigenvalues.map(|l| l.max(0.0));
        Ok(Self { eigvecs: eigen.eigenvectors, eigvals, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Quadratic form through the factorization.
    fn quad_factored(&self, coords: &DVector<f64>) -> f64 {
        coords
            .iter()
            .zip(self.eigvals.iter())
            .map(|(z, l)| l * z * z)
            .sum()
    }

    /// The projection itself. Returns the input unchanged when it is
    /// already inside. The multiplier solve is Newton on the convex
    /// decreasing function
    /// `F(theta) = sum lambda_i zeta_i^2 / (1 + theta lambda_i)^2 - r`,
    /// started from 0 so the iterates increase monotonically to the root.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        if z.is_empty() {
            return z.clone();
        }
        let zeta = self.eigvecs.transpose() * z;
        let q0 = self.quad_factored(&zeta);
        if q0 <= self.radius {
            return z.clone();
        }
        let f_and_deriv = |theta: f64| -> (f64, f64) {
            let mut f = -self.radius;
            let mut df = 0.0;
            for (zi, li) in zeta.iter().zip(self.eigvals.iter()) {
                let denom = 1.0 + theta * li;
                let a = li * zi * zi;
                f += a / (denom * denom);
                df += -2.0 * a * li / (denom * denom * denom);
            }
            (f, df)
        };
        let mut theta = 0.0;
        for _ in 0..200 {
            let (f, df) = f_and_deriv(theta);
            if f <= 1e-14 * self.radius || df == 0.0 {
                break;
            }
            let step = -f / df;
            // convex decreasing with a root to the right: the Newton step
            // is positive and never overshoots, but guard against rounding
            if !(step.is_finite() && step > 0.0) {
                break;
            }
            theta += step;
        }
        let scaled = DVector::from_iterator(
            zeta.len(),
            zeta.iter()
                .zip(self.eigvals.iter())
                .map(|(zi, li)| zi / (1.0 + theta * li)),
        );
        &self.eigvecs * scaled
    }
}

/// One-call Euclidean projection of `z` onto `{ y : y' G y <= r }`.
pub fn project_ellipsoid(
    z: &DVector<f64>,
    gram: &DMatrix<f64>,
    radius: f64,
) -> Result<DVector<f64>, SolveError> {
    if z.len() != gram.nrows() {
        return Err(SolveError::DimensionMismatch(format!(
            "point has length {}, gram is {}x{}",
            z.len(),
            gram.nrows(),
            gram.ncols()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteInput);
    }
    Ok(EllipsoidProjector::new(gram, radius)?.project(z))
}

/// The two ball projectors of a program, acting on disjoint blocks.
struct BlockProjector {
    s: EllipsoidProjector,
    d: EllipsoidProjector,
    m_s: usize,
    m_d: usize,
}

impl BlockProjector {
    fn new(p: &FiniteProgram) -> Result<Self, SolveError> {
        let s = EllipsoidProjector::new(p.gram_s(), p.radius_s()).map_err(|e| match e {
            SolveError::GramNotPsd { min_eig, .. } => {
                SolveError::GramNotPsd { space: "S", min_eig }
            }
            other => other,
        })?;
        let d = EllipsoidProjector::new(p.gram_d(), p.radius_d()).map_err(|e| match e {
            SolveError::GramNotPsd { min_eig, .. } => {
                SolveError::GramNotPsd { space: "D", min_eig }
            }
            other => other,
        })?;
        Ok(Self { s, d, m_s: p.num_s(), m_d: p.num_d() })
    }

    fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let w = self.s.project(&DVector::from(z.rows(0, self.m_s)));
        let v = self.d.project(&DVector::from(z.rows(self.m_s, self.m_d)));
        let mut out = DVector::zeros(self.m_s + self.m_d);
        out.rows_mut(0, self.m_s).copy_from(&w);
        out.rows_mut(self.m_s, self.m_d).copy_from(&v);
        out
    }
}

/// Rank-revealing row preprocessing by modified Gram-Schmidt. Rows whose
/// orthogonalized norm falls below 1e-10 are dropped; the surviving rows
/// are replaced by an orthonormal basis of their span, which makes the
/// augmented-Lagrangian subproblems perfectly conditioned in the constraint
/// term. `a_kept = r * q` with `r` lower triangular, so multipliers found
/// for the orthonormal system map back to the original rows by a
/// triangular solve.
struct RowBasis {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    /// Orthonormal rows spanning the kept rows.
    q: DMatrix<f64>,
    /// Lower-triangular coefficients: kept row i = sum_j r[(i,j)] q_j.
    r: DMatrix<f64>,
    /// Transformed right-hand side, `r * b_tilde = b_kept`.
    b_tilde: DVector<f64>,
}

fn rank_revealing_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> RowBasis {
    const DROP_TOL: f64 = 1e-10;
    let dim = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut coeff_rows: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..a.nrows() {
        let mut row = a.row(i).transpose();
        let mut coeffs = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (j, q) in basis.iter().enumerate() {
                let c = q.dot(&row);
                coeffs[j] += c;
                row.axpy(-c, q, 1.0);
            }
        }
        let norm = row.norm();
        if norm < DROP_TOL {
            dropped.push(i);
        } else {
            kept.push(i);
            coeffs.push(norm);
            coeff_rows.push(coeffs);
            basis.push(row / norm);
        }
    }
    let k = kept.len();
    let mut q = DMatrix::zeros(k, dim);
    let mut r = DMatrix::zeros(k, k);
    for (j, qv) in basis.iter().enumerate() {
        q.row_mut(j).copy_from(&qv.transpose());
        for (col, &c) in coeff_rows[j].iter().enumerate() {
            r[(j, col)] = c;
        }
    }
    // forward substitution: r * b_tilde = b_kept
    let mut b_tilde = DVector::zeros(k);
    for i in 0..k {
        let mut acc = b[kept[i]];
        for j in 0..i {
            acc -= r[(i, j)] * b_tilde[j];
        }
        b_tilde[i] = acc / r[(i, i)];
    }
    RowBasis { kept, dropped, q, r, b_tilde }
}

impl RowBasis {
    /// Map multipliers of the orthonormal system back to the original kept
    /// rows: solves `r' lambda_orig = lambda_q`.
    fn multipliers_for_original_rows(&self, lambda_q: &DVector<f64>) -> DVector<f64> {
        let k = self.kept.len();
        let mut out = DVector::zeros(k);
        for i in (0..k).rev() {
            let mut acc = lambda_q[i];
            for j in (i + 1)..k {
                acc -= self.r[(j, i)] * out[j];
            }
            out[i] = acc / self.r[(i, i)];
        }
        out
    }
}

/// Largest squared singular value by deterministic power iteration,
/// inflated slightly so it upper-bounds the true value for step sizing.
fn spectral_norm_sq(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let n = a.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = a.transpose() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            // the iterate fell in the null space; the Frobenius norm is a
            // safe upper bound
            return a.iter().map(|x| x * x).sum();
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-13 * next.abs().max(1e-300) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda * 1.05
}

/// Shared residual computations; `solve` stores exactly these values and
/// [`kkt_residuals`] recomputes them through the same code path, so the two
/// agree bit for bit.
struct Residuals {
    eq_residual_inf: f64,
    stationarity: f64,
    complementarity: f64,
    ball_multiplier_s: f64,
    ball_multiplier_d: f64,
    ball_s_used: f64,
    ball_d_used: f64,
}

fn quad_form(g: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
    if z.is_empty() {
        0.0
    } else {
        (g * z).dot(z)
    }
}

fn compute_residuals(
    p: &FiniteProgram,
    proj: &BlockProjector,
    z: &DVector<f64>,
    eq_multipliers: &DVector<f64>,
) -> Residuals {
    let eq_residual_inf = if p.num_rows() == 0 {
        0.0
    } else {
        (p.constraints() * z - p.rhs()).amax()
    };
    // projected-gradient step at unit step size onto the ball intersection
    let grad = p.objective() + p.constraints().transpose() * eq_multipliers;
    let stepped = proj.project(&(z - &grad));
    let stationarity = (z - stepped).norm();

    let w = DVector::from(z.rows(0, p.num_s()));
    let v = DVector::from(z.rows(p.num_s(), p.num_d()));
    let quad_s = quad_form(p.gram_s(), &w);
    let quad_d = quad_form(p.gram_d(), &v);
    let ball_s_used = quad_s / p.radius_s();
    let ball_d_used = quad_d / p.radius_d();

    // least-squares multiplier for each active ball: grad + mu * 2 G z = 0
    let ball_mu = |g: &DMatrix<f64>, block: &DVector<f64>, grad_block: DVector<f64>, used: f64| {
        if block.is_empty() || used < 1.0 - 1e-6 {
            return 0.0;
        }
        let d = 2.0 * (g * block);
        let denom = d.dot(&d);
        if denom == 0.0 {
            0.0
        } else {
            (-grad_block.dot(&d) / denom).max(0.0)
        }
    };
    let ball_multiplier_s =
        ball_mu(p.gram_s(), &w, DVector::from(grad.rows(0, p.num_s())), ball_s_used);
    let ball_multiplier_d = ball_mu(
        p.gram_d(),
        &v,
        DVector::from(grad.rows(p.num_s(), p.num_d())),
        ball_d_used,
    );
    let complementarity = (ball_multiplier_s * (quad_s - p.radius_s())).abs()
        + (ball_multiplier_d * (quad_d - p.radius_d())).abs();
    Residuals {
        eq_residual_inf,
        stationarity,
        complementarity,
        ball_multiplier_s,
        ball_multiplier_d,
        ball_s_used,
        ball_d_used,
    }
}

/// Recompute `(eq_residual_inf, stationarity, complementarity)` for a
/// candidate point, from the program data alone. The first two match the
/// values stored in the [`SolveResult`] bit for bit.
pub fn kkt_residuals(p: &FiniteProgram, res: &SolveResult) -> Result<(f64, f64, f64), SolveError> {
    let proj = BlockProjector::new(p)?;
    let r = compute_residuals(p, &proj, &res.z(), &res.eq_multipliers);
    Ok((r.eq_residual_inf, r.stationarity, r.complementarity))
}

const PENALTY_CAP: f64 = 1e12;

/// Augmented-Lagrangian solve; see the module docs for the method contract.
pub fn solve(p: &FiniteProgram, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    opts.validate()?;
    if p.objective().iter().any(|v| !v.is_finite())
        || p.constraints().iter().any(|v| !v.is_finite())
        || p.rhs().iter().any(|v| !v.is_finite())
    {
        return Err(SolveError::NonFiniteInput);
    }
    let proj = BlockProjector::new(p)?;
    let dim = p.num_s() + p.num_d();

    let rows = rank_revealing_rows(p.constraints(), p.rhs());
    let kept = rows.kept.clone();
    let (a, b) = (rows.q.clone(), rows.b_tilde.clone());
    let a_t = a.transpose();
    let norm_a_sq = spectral_norm_sq(&a);

    let mut z: DVector<f64> = DVector::zeros(dim);
    let mut lambda: DVector<f64> = DVector::zeros(kept.len());
    let mut penalty = opts.penalty_init;
    let mut inner_budget = opts.max_iters;
    let mut iterations = 0usize;
    let mut outer_trace = Vec::new();
    let mut prev_feas = f64::INFINITY;
    let mut stalled_outers = 0usize;
    // best iterate seen, by full-system feasibility; returned when the
    // tolerances are never met
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;

    let merit = |z: &DVector<f64>, lambda: &DVector<f64>, penalty: f64| -> f64 {
        if kept.is_empty() {
            return p.objective().dot(z);
        }
        let resid = &a * z - &b;
        p.objective().dot(z) + lambda.dot(&resid) + 0.5 * penalty * resid.norm_squared()
    };

    let mut status = loop {
        // ---- inner solve at fixed (lambda, penalty) ----
        // polish the subproblem only as far as the current feasibility
        // warrants; a tight inner solve at a low penalty is wasted work
        let inner_tol = {
            let lo = opts.stat_tol;
            let hi = (1e-2_f64).max(lo);
            (0.1 * prev_feas).clamp(lo, hi)
        };
        let grad = |z: &DVector<f64>| -> DVector<f64> {
            if kept.is_empty() {
                return p.objective().clone();
            }
            p.objective() + &a_t * &lambda + penalty * (&a_t * (&a * z - &b))
        };
        let lipschitz = penalty * norm_a_sq;
        let step = if lipschitz > 1e-12 { 1.0 / lipschitz } else { 1e12 };

        let merit_start = merit(&z, &lambda, penalty);
        let mut merit_z = merit_start;
        let mut y = z.clone();
        let mut t_momentum: f64 = 1.0;
        let mut inner_iterations = 0usize;
        let mut stationarity_inner;
        loop {
            // accelerated candidate from the extrapolated point, with a
            // plain projected-gradient fallback that restores monotonicity
            let cand = proj.project(&(&y - step * grad(&y)));
            let merit_cand = merit(&cand, &lambda, penalty);
            let z_next;
            let merit_next;
            if merit_cand <= merit_z {
                z_next = cand;
                merit_next = merit_cand;
            } else {
                let mut eta = step;
                let mut fallback = proj.project(&(&z - eta * grad(&z)));
                let mut merit_fb = merit(&fallback, &lambda, penalty);
                let mut halvings = 0;
                while merit_fb > merit_z && halvings < 60 {
                    eta *= 0.5;
                    fallback = proj.project(&(&z - eta * grad(&z)));
                    merit_fb = merit(&fallback, &lambda, penalty);
                    halvings += 1;
                }
                if merit_fb <= merit_z {
                    z_next = fallback;
                    merit_next = merit_fb;
                } else {
                    // rounding floor: keep the current iterate
                    z_next = z.clone();
                    merit_next = merit_z;
                }
                t_momentum = 1.0; // restart momentum after a safeguard
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_momentum * t_momentum).sqrt());
            y = &z_next + ((t_momentum - 1.0) / t_next) * (&z_next - &z);
            let no_progress = (&z_next - &z).norm() == 0.0;
            z = z_next;
            merit_z = merit_next;
            t_momentum = t_next;
            inner_iterations += 1;
            iterations += 1;

            let check_now = inner_iterations % 10 == 0
                || inner_iterations >= inner_budget
                || no_progress;
            if check_now {
                // keep the most feasible point seen, measured on the full
                // system, with the matching first-order multiplier estimate
                let feas_now = if p.num_rows() == 0 {
                    0.0
                } else {
                    (p.constraints() * &z - p.rhs()).amax()
                };
                if best.as_ref().is_none_or(|(f, _, _)| feas_now < *f) {
                    let lambda_now = if kept.is_empty() {
                        lambda.clone()
                    } else {
                        &lambda + penalty * (&a * &z - &b)
                    };
                    best = Some((feas_now, z.clone(), lambda_now));
                }
                let stepped = proj.project(&(&z - grad(&z)));
                stationarity_inner = (&z - stepped).norm();
                if stationarity_inner <= inner_tol
                    || inner_iterations >= inner_budget
                    || no_progress
                {
                    break;
                }
            }
        }
        inner_budget = inner_budget.saturating_sub(inner_iterations);

        let resid_kept = if kept.is_empty() { DVector::zeros(0) } else { &a * &z - &b };
        let feas_kept = if kept.is_empty() { 0.0 } else { resid_kept.amax() };
        let feas_full = if p.num_rows() == 0 {
            0.0
        } else {
            (p.constraints() * &z - p.rhs()).amax()
        };
        outer_trace.push(OuterTrace {
            merit_start,
            merit_end: merit_z,
            eq_residual_inf: feas_full,
            penalty,
            inner_iterations,
        });

        // first-order multiplier update; afterwards c + A' lambda equals the
        // inner gradient at z, so the stationarity measure carries over
        lambda += penalty * &resid_kept;

        if best.as_ref().is_none_or(|(f, _, _)| feas_full < *f) {
            best = Some((feas_full, z.clone(), lambda.clone()));
        }
        let stepped = proj.project(&(&z - (p.objective() + &a_t * &lambda)));
        let stationarity = (&z - stepped).norm();
        if feas_full <= opts.eq_tol && stationarity <= opts.stat_tol {
            break SolveStatus::Optimal;
        }
        if inner_budget == 0 {
            break SolveStatus::ToleranceNotMet;
        }

        // penalty and stall management
        if feas_kept > 0.25 * prev_feas {
            penalty = (penalty * opts.penalty_growth).min(PENALTY_CAP);
        }
        if penalty >= PENALTY_CAP && feas_kept > 0.99 * prev_feas && feas_kept > opts.eq_tol {
            stalled_outers += 1;
            if stalled_outers >= 3 {
                // the equality system cannot be met inside the balls; report
                // the least-violation point found
                break SolveStatus::Infeasible;
            }
        } else {
            stalled_outers = 0;
        }
        prev_feas = feas_kept;
    };

    // when the loop ends without meeting the tolerances, fall back to the
    // most feasible iterate seen
    if status != SolveStatus::Optimal {
        if let Some((_, best_z, best_lambda)) = best {
            z = best_z;
            lambda = best_lambda;
        }
    }

    // map multipliers from the orthonormal basis back to the original rows
    // and expand over the full row set
    let lambda_orig = rows.multipliers_for_original_rows(&lambda);
    let mut eq_multipliers = DVector::zeros(p.num_rows());
    for (idx, &row) in kept.iter().enumerate() {
        eq_multipliers[row] = lambda_orig[idx];
    }
    let residuals = compute_residuals(p, &proj, &z, &eq_multipliers);
    let w = DVector::from(z.rows(0, p.num_s()));
    let v = DVector::from(z.rows(p.num_s(), p.num_d()));
    let objective = p.objective().dot(&z);

    if status == SolveStatus::Optimal
        && !(residuals.eq_residual_inf <= opts.eq_tol
            && residuals.stationarity <= opts.stat_tol
            && residuals.ball_s_used <= 1.0 + 1e-8
            && residuals.ball_d_used <= 1.0 + 1e-8)
    {
        status = SolveStatus::ToleranceNotMet;
    }

    Ok(SolveResult {
        w,
        v,
        objective,
        eq_residual_inf: residuals.eq_residual_inf,
        ball_s_used: residuals.ball_s_used,
        ball_d_used: residuals.ball_d_used,
        stationarity: residuals.stationarity,
        iterations,
        status,
        eq_multipliers,
        ball_multiplier_s: residuals.ball_multiplier_s,
        ball_multiplier_d: residuals.ball_multiplier_d,
        dropped_rows: rows.dropped,
        outer_trace,
    })
}

/// Complementarity alone, for callers that already hold the other two
/// residuals from [`kkt_residuals`].
pub fn complementarity(p: &FiniteProgram, res: &SolveResult) -> Result<f64, SolveError> {
    let proj = BlockProjector::new(p)?;
    Ok(compute_residuals(p, &proj, &res.z(), &res.eq_multipliers).complementarity)
}
