//! Build the finite-rank program: place centers in the problem's boxes,
//! collocate the total-derivative operator on them, and assemble the
//! objective vector, constraint matrix, right-hand side, Gram blocks, and
//! ball radii.
//!
//! The decision variables are the coefficients `w` of the occupation-kernel
//! surrogate `sum w_i K_S(., s_i)` and `v` of the terminal-section surrogate
//! `sum v_i K_D(., d_i)`. Each test function `sigma_m = K_Sigma(., c_m)`
//! contributes one equality row
//! `sum_i v_i sigma_m(T, d_i) - sum_i w_i (A_f sigma_m)(s_i) = sigma_m(0, x0)`
//! and the Hilbert-norm balls `w' G_S w <= T^2 phi0` and
//! `v' G_D v <= phi0` keep the program bounded.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exprlang::{EvalError, Expr};
use crate::halton::HaltonSampler;
use crate::kernels::{KernelConfig, KernelError};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("box bounds have mismatched lengths: {lower} lower, {upper} upper")]
    BoxLengthMismatch { lower: usize, upper: usize },
    #[error("box bound {index} is empty or inverted: [{lower}, {upper}]")]
    BadBoxBound { index: usize, lower: f64, upper: f64 },
    #[error("non-finite box bound")]
    NonFiniteBox,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("initial state leaves the state box in coordinate {0}")]
    X0OutsideBox(usize),
    #[error("initial state has {got} entries, state box has {expected}")]
    X0Length { expected: usize, got: usize },
    #[error("dynamics list has {got} entries for a {expected}-dimensional state")]
    DynamicsArity { expected: usize, got: usize },
    #[error("expression `{role}` has signature (n={n}, m={m}), expected (n={expected_n}, m={expected_m})")]
    ExprSignature { role: &'static str, n: usize, m: usize, expected_n: usize, expected_m: usize },
    #[error("terminal cost must not reference t or controls")]
    TerminalCostUsesTime,
    #[error("kernel for {space} has dimension {got}, expected {expected}")]
    KernelDim { space: &'static str, expected: usize, got: usize },
    #[error("center counts must be at least 1")]
    ZeroCount,
    #[error(
        "M_b = {m_b} exceeds M_S + M_D = {m_s_plus_m_d}; the equality system would be overdetermined"
    )]
    TooManyTestFunctions { m_b: usize, m_s_plus_m_d: usize },
    #[error("grid strategy ran out of distinct points for {0} centers")]
    GridExhausted(usize),
    #[error("{set} center {index} lies outside its box in coordinate {coordinate}")]
    CenterOutsideBox { set: &'static str, index: usize, coordinate: usize },
    #[error("{set} center {index} has length {got}, expected {expected}")]
    CenterLength { set: &'static str, index: usize, expected: usize, got: usize },
    #[error("sigma centers {first} and {second} coincide within 1e-9")]
    DuplicateSigmaCenter { first: usize, second: usize },
    #[error("sigma center 0 must be the pinned (0, x0)")]
    MissingPinnedCenter,
    #[error("evaluating {role} at {set} center {index} failed: {source}")]
    CenterEvaluation {
        role: &'static str,
        set: &'static str,
        index: usize,
        source: EvalError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// An axis-aligned box `[lower_1, upper_1] x .. x [lower_d, upper_d]`.
/// A zero-dimensional box is allowed and contains exactly the empty point;
/// it carries `m = 0` control spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, AssemblyError> {
        if lower.len() != upper.len() {
            return Err(AssemblyError::BoxLengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for (index, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(AssemblyError::NonFiniteBox);
            }
            if lo >= hi {
                return Err(AssemblyError::BadBoxBound { index, lower: lo, upper: hi });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Index of the first coordinate where `point` leaves the box
    /// (boundaries inclusive), or `None` if it is inside.
    pub fn first_violation(&self, point: &[f64]) -> Option<usize> {
        point
            .iter()
            .enumerate()
            .position(|(i, &v)| v < self.lower[i] || v > self.upper[i])
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim() && self.first_violation(point).is_none()
    }

    /// Affine image of a unit-cube point.
    pub fn scale_from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(i, &u)| self.lower[i] + u * (self.upper[i] - self.lower[i]))
            .collect()
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// The product box `[0, horizon] x self`.
    pub fn with_time(&self, horizon: f64) -> BoxDomain {
        let mut lower = Vec::with_capacity(1 + self.dim());
        let mut upper = Vec::with_capacity(1 + self.dim());
        lower.push(0.0);
        upper.push(horizon);
        lower.extend_from_slice(&self.lower);
        upper.extend_from_slice(&self.upper);
        BoxDomain { lower, upper }
    }

    /// The product box `self x other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower.extend_from_slice(&other.lower);
        upper.extend_from_slice(&other.upper);
        BoxDomain { lower, upper }
    }
}

/// The full problem data: dynamics, costs, horizon, initial state, boxes,
/// and one kernel per function space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    horizon: f64,
    x0: Vec<f64>,
    x_box: BoxDomain,
    u_box: BoxDomain,
    d_box: BoxDomain,
    dynamics: Vec<Expr>,
    running_cost: Expr,
    terminal_cost: Expr,
    kernel_s: KernelConfig,
    kernel_sigma: KernelConfig,
    kernel_d: KernelConfig,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: f64,
        x0: Vec<f64>,
        x_box: BoxDomain,
        u_box: BoxDomain,
        d_box: BoxDomain,
        dynamics: Vec<Expr>,
        running_cost: Expr,
        terminal_cost: Expr,
        kernel_s: KernelConfig,
        kernel_sigma: KernelConfig,
        kernel_d: KernelConfig,
    ) -> Result<Self, AssemblyError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(AssemblyError::BadHorizon(horizon));
        }
        let n = x_box.dim();
        let m = u_box.dim();
        if x0.len() != n {
            return Err(AssemblyError::X0Length { expected: n, got: x0.len() });
        }
        if let Some(coordinate) = x_box.first_violation(&x0) {
            return Err(AssemblyError::X0OutsideBox(coordinate));
        }
        if d_box.dim() != n {
            return Err(AssemblyError::BoxLengthMismatch { lower: d_box.dim(), upper: n });
        }
        if dynamics.len() != n {
            return Err(AssemblyError::DynamicsArity { expected: n, got: dynamics.len() });
        }
        for f in &dynamics {
            check_signature("dynamics", f, n, m)?;
        }
        check_signature("running_cost", &running_cost, n, m)?;
        check_signature("terminal_cost", &terminal_cost, n, 0)?;
        if terminal_cost.references_t() {
            return Err(AssemblyError::TerminalCostUsesTime);
        }
        check_kernel_dim("S", &kernel_s, 1 + n + m)?;
        check_kernel_dim("Sigma", &kernel_sigma, 1 + n)?;
        check_kernel_dim("D", &kernel_d, n)?;
        Ok(Self {
            horizon,
            x0,
            x_box,
            u_box,
            d_box,
            dynamics,
            running_cost,
            terminal_cost,
            kernel_s,
            kernel_sigma,
            kernel_d,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.x_box.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.u_box.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x_box(&self) -> &BoxDomain {
        &self.x_box
    }

    pub fn u_box(&self) -> &BoxDomain {
        &self.u_box
    }

    pub fn d_box(&self) -> &BoxDomain {
        &self.d_box
    }

    pub fn dynamics(&self) -> &[Expr] {
        &self.dynamics
    }

    pub fn running_cost(&self) -> &Expr {
        &self.running_cost
    }

    pub fn terminal_cost(&self) -> &Expr {
        &self.terminal_cost
    }

    pub fn kernel_s(&self) -> &KernelConfig {
        &self.kernel_s
    }

    pub fn kernel_sigma(&self) -> &KernelConfig {
        &self.kernel_sigma
    }

    pub fn kernel_d(&self) -> &KernelConfig {
        &self.kernel_d
    }

    /// `Sigma = [0, T] x X`.
    pub fn sigma_box(&self) -> BoxDomain {
        self.x_box.with_time(self.horizon)
    }

    /// `S = [0, T] x X x U`.
    pub fn s_box(&self) -> BoxDomain {
        self.sigma_box().product(&self.u_box)
    }

    /// The pinned point `(0, x0)` in `Sigma`.
    pub fn pinned_sigma_center(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 + self.state_dim());
        p.push(0.0);
        p.extend_from_slice(&self.x0);
        p
    }
}

fn check_signature(
    role: &'static str,
    expr: &Expr,
    n: usize,
    m: usize,
) -> Result<(), AssemblyError> {
    if expr.state_dim() != n || expr.control_dim() != m {
        return Err(AssemblyError::ExprSignature {
            role,
            n: expr.state_dim(),
            m: expr.control_dim(),
            expected_n: n,
            expected_m: m,
        });
    }
    Ok(())
}

fn check_kernel_dim(
    space: &'static str,
    kernel: &KernelConfig,
    expected: usize,
) -> Result<(), AssemblyError> {
    if kernel.dim() != expected {
        return Err(AssemblyError::KernelDim { space, expected, got: kernel.dim() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterStrategy {
    Halton,
    Grid,
}

/// Two sigma centers closer than this in sup norm are considered
/// duplicates; duplicate test functions make rows of `A` identical.
const SIGMA_SEPARATION: f64 = 1e-9;

/// The discretization: expansion centers in `S` and `D`, test-function
/// centers in `Sigma`. `sigma_centers[0]` is always the pinned `(0, x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    s_centers: Vec<Vec<f64>>,
    d_centers: Vec<Vec<f64>>,
    sigma_centers: Vec<Vec<f64>>,
    seed: u64,
}

impl CenterSet {
    /// Validating constructor for explicitly supplied centers, e.g.
    /// trajectory nodes used as expansion points.
    pub fn new(
        spec: &ProblemSpec,
        s_centers: Vec<Vec<f64>>,
        d_centers: Vec<Vec<f64>>,
        sigma_centers: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self, AssemblyError> {
        if s_centers.is_empty() || d_centers.is_empty() || sigma_centers.is_empty() {
            return Err(AssemblyError::ZeroCount);
        }
        if sigma_centers.len() > s_centers.len() + d_centers.len() {
            return Err(AssemblyError::TooManyTestFunctions {
                m_b: sigma_centers.len(),
                m_s_plus_m_d: s_centers.len() + d_centers.len(),
            });
        }
        let s_box = spec.s_box();
        let sigma_box = spec.sigma_box();
        check_centers("s", &s_centers, &s_box)?;
        check_centers("d", &d_centers, spec.d_box())?;
        check_centers("sigma", &sigma_centers, &sigma_box)?;
        let pinned = spec.pinned_sigma_center();
        if sup_distance(&sigma_centers[0], &pinned) > SIGMA_SEPARATION {
            return Err(AssemblyError::MissingPinnedCenter);
        }
        for i in 0..sigma_centers.len() {
            for j in (i + 1)..sigma_centers.len() {
                if sup_distance(&sigma_centers[i], &sigma_centers[j]) < SIGMA_SEPARATION {
                    return Err(AssemblyError::DuplicateSigmaCenter { first: i, second: j });
                }
            }
        }
        Ok(Self { s_centers, d_centers, sigma_centers, seed })
    }

    pub fn s_centers(&self) -> &[Vec<f64>] {
        &self.s_centers
    }

    pub fn d_centers(&self) -> &[Vec<f64>] {
        &self.d_centers
    }

    pub fn sigma_centers(&self) -> &[Vec<f64>] {
        &self.sigma_centers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn check_centers(
    set: &'static str,
    centers: &[Vec<f64>],
    domain: &BoxDomain,
) -> Result<(), AssemblyError> {
    for (index, c) in centers.iter().enumerate() {
        if c.len() != domain.dim() {
            return Err(AssemblyError::CenterLength {
                set,
                index,
                expected: domain.dim(),
                got: c.len(),
            });
        }
        if let Some(coordinate) = domain.first_violation(c) {
            return Err(AssemblyError::CenterOutsideBox { set, index, coordinate });
        }
    }
    Ok(())
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Place centers quasi-uniformly in the problem's boxes. Deterministic for
/// a fixed strategy, seed, counts, and spec: Halton replays the sequence
/// starting at index `1 + seed`, Grid enumerates an axis-aligned lattice in
/// lexicographic order (and ignores the seed).
///
/// `sigma_centers[0]` is always the pinned `(0, x0)`; generated points that
/// collide with an existing sigma center within 1e-9 are skipped.
pub fn generate_centers(
    spec: &ProblemSpec,
    m_s: usize,
    m_d: usize,
    m_b: usize,
    strategy: CenterStrategy,
    seed: u64,
) -> Result<CenterSet, AssemblyError> {
    if m_s == 0 || m_d == 0 || m_b == 0 {
        return Err(AssemblyError::ZeroCount);
    }
    if m_b > m_s + m_d {
        return Err(AssemblyError::TooManyTestFunctions { m_b, m_s_plus_m_d: m_s + m_d });
    }
    let s_box = spec.s_box();
    let sigma_box = spec.sigma_box();
    let s_centers = fill_box(&s_box, m_s, strategy, seed)?;
    let d_centers = fill_box(spec.d_box(), m_d, strategy, seed)?;

    let mut sigma_centers = vec![spec.pinned_sigma_center()];
    // size the lattice one past m_b so a collision with the pinned center
    // cannot exhaust a grid supply
    let mut supply = CenterSupply::new(&sigma_box, m_b + 1, strategy, seed)?;
    while sigma_centers.len() < m_b {
        let Some(candidate) = supply.next() else {
            return Err(AssemblyError::GridExhausted(m_b));
        };
        if sigma_centers
            .iter()
            .all(|existing| sup_distance(existing, &candidate) >= SIGMA_SEPARATION)
        {
            sigma_centers.push(candidate);
        }
    }
    CenterSet::new(spec, s_centers, d_centers, sigma_centers, seed)
}

fn fill_box(
    domain: &BoxDomain,
    count: usize,
    strategy: CenterStrategy,
    seed: u64,
) -> Result<Vec<Vec<f64>>, AssemblyError> {
    let mut supply = CenterSupply::new(domain, count, strategy, seed)?;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Some(p) = supply.next() else {
            return Err(AssemblyError::GridExhausted(count));
        };
        out.push(p);
    }
    Ok(out)
}

/// A deterministic stream of points inside one box.
enum CenterSupply {
    Halton { domain: BoxDomain, sampler: HaltonSampler },
    Grid { points: std::vec::IntoIter<Vec<f64>> },
}

impl CenterSupply {
    fn new(
        domain: &BoxDomain,
        count: usize,
        strategy: CenterStrategy,
        seed: u64,
    ) -> Result<Self, AssemblyError> {
        match strategy {
            CenterStrategy::Halton => Ok(Self::Halton {
                domain: domain.clone(),
                sampler: HaltonSampler::new(domain.dim(), seed),
            }),
            CenterStrategy::Grid => {
                let points = grid_points(domain, count);
                Ok(Self::Grid { points: points.into_iter() })
            }
        }
    }

    fn next(&mut self) -> Option<Vec<f64>> {
        match self {
            Self::Halton { domain, sampler } => {
                Some(domain.scale_from_unit(&sampler.next_point()))
            }
            Self::Grid { points } => points.next(),
        }
    }
}

/// Lexicographic lattice with `ceil(count^(1/d))` nodes per axis, endpoints
/// included; a single node sits at the axis midpoint.
fn grid_points(domain: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    let d = domain.dim();
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut per_axis = (count as f64).powf(1.0 / d as f64).ceil() as usize;
    per_axis = per_axis.max(1);
    // guard floating error in the root
    while (per_axis as u128).pow(d as u32) < count as u128 {
        per_axis += 1;
    }
    let axis_values: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let lo = domain.lower()[i];
            let hi = domain.upper()[i];
            if per_axis == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..per_axis)
                    .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let total = axis_values.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut index = vec![0usize; d];
    'outer: loop {
        out.push((0..d).map(|i| axis_values[i][index[i]]).collect());
        let mut pos = d;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < per_axis {
                break;
            }
            index[pos] = 0;
        }
    }
    out
}

/// `count^(1/d)` exact-lattice variant used by the spec example tests.
pub fn grid_points_in_box(domain: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    grid_points(domain, count).into_iter().take(count).collect()
}

/// The total-derivative operator applied to the kernel section
/// `sigma = K_Sigma(., sigma_center)` and evaluated at the collocation
/// point `s = (t, x, u)`:
/// `(A_f sigma)(s) = d/dt K_Sigma((t,x), c) + f(t,x,u) . grad_x K_Sigma((t,x), c)`.
///
/// Both derivative terms come from the kernel's analytic first gradient on
/// the concatenated `(t, x)` argument.
pub fn apply_total_derivative(
    k_sigma: &KernelConfig,
    sigma_center: &[f64],
    s: &[f64],
    dynamics: &[Expr],
) -> Result<f64, AssemblyError> {
    let n = dynamics.len();
    let m = dynamics.first().map_or(0, Expr::control_dim);
    if s.len() != 1 + n + m {
        return Err(AssemblyError::CenterLength {
            set: "s",
            index: 0,
            expected: 1 + n + m,
            got: s.len(),
        });
    }
    let t = s[0];
    let x = &s[1..1 + n];
    let u = &s[1 + n..];
    let tx = &s[..1 + n];
    let grad = k_sigma.grad_first(tx, sigma_center)?;
    let mut value = grad[0];
    for (i, f_i) in dynamics.iter().enumerate() {
        let fi = f_i.eval(t, x, u).map_err(|source| AssemblyError::CenterEvaluation {
            role: "dynamics",
            set: "s",
            index: 0,
            source,
        })?;
        value += fi * grad[1 + i];
    }
    Ok(value)
}

/// Diagnostics about constraint rows whose test function cannot see any
/// expansion center (compact-support kernels only).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssemblyDiagnostics {
    /// Rows of `A` whose sigma center lies beyond the Sigma-kernel support
    /// of every collocation argument; such rows are numerically all-zero.
    pub far_sigma_rows: Vec<usize>,
}

/// The data of the finite-rank program:
/// minimize `c . (w, v)` subject to `A (w, v) = b`,
/// `w' G_S w <= r_S`, `v' G_D v <= r_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProgram {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g_s: DMatrix<f64>,
    g_d: DMatrix<f64>,
    r_s: f64,
    r_d: f64,
    m_s: usize,
    m_d: usize,
    diagnostics: AssemblyDiagnostics,
}

impl FiniteProgram {
    /// Direct constructor for hand-built programs (tests, external dumps).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        c: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        g_s: DMatrix<f64>,
        g_d: DMatrix<f64>,
        r_s: f64,
        r_d: f64,
        m_s: usize,
        m_d: usize,
    ) -> Self {
        assert_eq!(c.len(), m_s + m_d);
        assert_eq!(a.ncols(), m_s + m_d);
        assert_eq!(a.nrows(), b.len());
        assert_eq!(g_s.nrows(), m_s);
        assert_eq!(g_d.nrows(), m_d);
        Self {
            c,
            a,
            b,
            g_s,
            g_d,
            r_s,
            r_d,
            m_s,
            m_d,
            diagnostics: AssemblyDiagnostics::default(),
        }
    }

    pub fn objective(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn gram_s(&self) -> &DMatrix<f64> {
        &self.g_s
    }

    pub fn gram_d(&self) -> &DMatrix<f64> {
        &self.g_d
    }

    pub fn radius_s(&self) -> f64 {
        self.r_s
    }

    pub fn radius_d(&self) -> f64 {
        self.r_d
    }

    pub fn num_s(&self) -> usize {
        self.m_s
    }

    pub fn num_d(&self) -> usize {
        self.m_d
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn diagnostics(&self) -> &AssemblyDiagnostics {
        &self.diagnostics
    }

    /// Plain-text matrix dump for external-solver cross-checks.
    ///
    /// Layout: a sizes header `M_S M_D M_b`, then `c` on one line, the rows
    /// of `A`, `b` on one line, the rows of `G_S`, the rows of `G_D`, and
    /// finally `r_S r_D`. Values are space-separated shortest-round-trip
    /// decimals.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<(), AssemblyError> {
        let line = |vals: &mut dyn Iterator<Item = f64>| -> String {
            vals.map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(w, "{} {} {}", self.m_s, self.m_d, self.a.nrows())?;
        writeln!(w, "{}", line(&mut self.c.iter().copied()))?;
        for row in 0..self.a.nrows() {
            writeln!(w, "{}", line(&mut self.a.row(row).iter().copied()))?;
        }
        writeln!(w, "{}", line(&mut self.b.iter().copied()))?;
        for row in 0..self.g_s.nrows() {
            writeln!(w, "{}", line(&mut self.g_s.row(row).iter().copied()))?;
        }
        for row in 0..self.g_d.nrows() {
            writeln!(w, "{}", line(&mut self.g_d.row(row).iter().copied()))?;
        }
        writeln!(w, "{} {}", self.r_s, self.r_d)?;
        Ok(())
    }
}

/// Assemble the finite program from a spec and a center set.
pub fn assemble(spec: &ProblemSpec, centers: &CenterSet) -> Result<FiniteProgram, AssemblyError> {
    let m_s = centers.s_centers().len();
    let m_d = centers.d_centers().len();
    let m_b = centers.sigma_centers().len();
    let n = spec.state_dim();
    let k_sigma = spec.kernel_sigma();

    let mut c = DVector::zeros(m_s + m_d);
    for (i, s) in centers.s_centers().iter().enumerate() {
        let (t, x, u) = (s[0], &s[1..1 + n], &s[1 + n..]);
        c[i] = spec.running_cost().eval(t, x, u).map_err(|source| {
            AssemblyError::CenterEvaluation { role: "running_cost", set: "s", index: i, source }
        })?;
    }
    for (i, d) in centers.d_centers().iter().enumerate() {
        c[m_s + i] = spec.terminal_cost().eval(spec.horizon(), d, &[]).map_err(|source| {
            AssemblyError::CenterEvaluation { role: "terminal_cost", set: "d", index: i, source }
        })?;
    }

    // terminal points (T, d_i) in Sigma, evaluated by every test function
    let terminal_points: Vec<Vec<f64>> = centers
        .d_centers()
        .iter()
        .map(|d| {
            let mut p = Vec::with_capacity(1 + n);
            p.push(spec.horizon());
            p.extend_from_slice(d);
            p
        })
        .collect();
    let pinned = spec.pinned_sigma_center();

    let mut a = DMatrix::zeros(m_b, m_s + m_d);
    let mut b = DVector::zeros(m_b);
    for (row, sigma_center) in centers.sigma_centers().iter().enumerate() {
        for (i, s) in centers.s_centers().iter().enumerate() {
            let afs = apply_total_derivative(k_sigma, sigma_center, s, spec.dynamics())
                .map_err(|err| match err {
                    AssemblyError::CenterEvaluation { role, source, .. } => {
                        AssemblyError::CenterEvaluation { role, set: "s", index: i, source }
                    }
                    other => other,
                })?;
            a[(row, i)] = -afs;
        }
        for (i, tp) in terminal_points.iter().enumerate() {
            a[(row, m_s + i)] = k_sigma.eval(tp, sigma_center)?;
        }
        b[row] = k_sigma.eval(&pinned, sigma_center)?;
    }

    let g_s = spec.kernel_s().gram(centers.s_centers())?;
    let g_d = spec.kernel_d().gram(centers.d_centers())?;
    let r_s = spec.horizon() * spec.horizon() * spec.kernel_s().phi0();
    let r_d = spec.kernel_d().phi0();

    // flag test functions beyond kernel support of every collocation
    // argument; only compact-support kernels can produce them
    let mut far_sigma_rows = Vec::new();
    if let Some(support) = k_sigma.support_radius() {
        for (row, sigma_center) in centers.sigma_centers().iter().enumerate() {
            let sees_s = centers
                .s_centers()
                .iter()
                .any(|s| euclidean(&s[..1 + n], sigma_center) < support);
            let sees_d = terminal_points
                .iter()
                .any(|tp| euclidean(tp, sigma_center) < support);
            if !sees_s && !sees_d {
                far_sigma_rows.push(row);
            }
        }
    }

    Ok(FiniteProgram {
        c,
        a,
        b,
        g_s,
        g_d,
        r_s,
        r_d,
        m_s,
        m_d,
        diagnostics: AssemblyDiagnostics { far_sigma_rows },
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The median heuristic for Gaussian shape parameters: the median pairwise
/// squared distance among 200 Halton probe points in the box. Depends only
/// on the box, so resolved configurations are reproducible.
pub fn median_heuristic_shape(domain: &BoxDomain) -> f64 {
    const PROBES: usize = 200;
    let mut sampler = HaltonSampler::new(domain.dim(), 0);
    let points: Vec<Vec<f64>> = (0..PROBES)
        .map(|_| domain.scale_from_unit(&sampler.next_point()))
        .collect();
    let mut sq_dists = Vec::with_capacity(PROBES * (PROBES - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq_dists.push(d);
        }
    }
    sq_dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = sq_dists.len() / 2;
    if sq_dists.len() % 2 == 0 {
        0.5 * (sq_dists[mid - 1] + sq_dists[mid])
    } else {
        sq_dists[mid]
    }
}
