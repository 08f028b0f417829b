//! Radial kernel families with analytic first derivatives and Gram-matrix
//! assembly.
//!
//! Three families are supported, all normalized so that `K(x,x) = 1`:
//!
//! * Gaussian: `K(x,y) = exp(-||x-y||^2 / mu)` with length-scale-squared `mu`;
//! * Wendland C2: `phi(q) = (1-q)+^4 (4q+1)` with `q = ||x-y|| / rho`;
//! * Wendland C4: `phi(q) = (1-q)+^6 (35q^2+18q+3) / 3`.
//!
//! The Wendland polynomials are the standard minimal-degree forms, positive
//! definite for ambient dimension up to 3, which covers the desk-scale
//! problems this crate targets. The Gaussian is positive definite in every
//! dimension.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative diagonal jitter applied wherever a Gram matrix is factorized.
/// Guards repeated or near-duplicate centers.
pub const GRAM_JITTER_REL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: kernel expects vectors of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input coordinate")]
    NonFiniteInput,
    #[error("kernel shape parameter must be positive and finite, got {0}")]
    BadShape(f64),
    #[error("support radius must be positive and finite, got {0}")]
    BadSupportRadius(f64),
    #[error("kernel dimension must be at least 1")]
    ZeroDim,
    #[error("gram matrix needs at least one point")]
    EmptyPoints,
}

/// Which radial profile the kernel uses, together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-||x-y||^2 / shape)`; `shape` is the length scale squared.
    Gaussian { shape: f64 },
    /// `(1-q)+^4 (4q+1)`, `q = ||x-y|| / support_radius`.
    WendlandC2 { support_radius: f64 },
    /// `(1-q)+^6 (35q^2+18q+3)/3`, `q = ||x-y|| / support_radius`.
    WendlandC4 { support_radius: f64 },
}

/// A radial kernel on `R^dim`. Immutable after construction; all operations
/// are pure functions, safe to share across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    family: KernelFamily,
    dim: usize,
}

impl KernelConfig {
    pub fn gaussian(shape: f64, dim: usize) -> Result<Self, KernelError> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(KernelError::BadShape(shape));
        }
        Self::with_family(KernelFamily::Gaussian { shape }, dim)
    }

    pub fn wendland_c2(support_radius: f64, dim: usize) -> Result<Self, KernelError> {
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(KernelError::BadSupportRadius(support_radius));
        }
        Self::with_family(KernelFamily::WendlandC2 { support_radius }, dim)
    }

    pub fn wendland_c4(support_radius: f64, dim: usize) -> Result<Self, KernelError> {
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(KernelError::BadSupportRadius(support_radius));
        }
        Self::with_family(KernelFamily::WendlandC4 { support_radius }, dim)
    }

    fn with_family(family: KernelFamily, dim: usize) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::ZeroDim);
        }
        Ok(Self { family, dim })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length scale squared for Gaussian kernels.
    pub fn shape(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian { shape } => Some(shape),
            _ => None,
        }
    }

    /// Support radius for the compactly supported families; `None` means the
    /// kernel has unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Gaussian { .. } => None,
            KernelFamily::WendlandC2 { support_radius }
            | KernelFamily::WendlandC4 { support_radius } => Some(support_radius),
        }
    }

    /// The kernel value at zero separation. All supported families are
    /// normalized to 1, which makes the occupation-kernel norm bound
    /// `T^2 * phi0` and the terminal-section bound `phi0`.
    pub fn phi0(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { .. } => 1.0,
            KernelFamily::WendlandC2 { .. } => 1.0,
            KernelFamily::WendlandC4 { .. } => 1.0,
        }
    }

    fn check_args(&self, x: &[f64], y: &[f64]) -> Result<(), KernelError> {
        for v in [x, y] {
            if v.len() != self.dim {
                return Err(KernelError::DimensionMismatch {
                    expected: self.dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(KernelError::NonFiniteInput);
            }
        }
        Ok(())
    }

    /// `K(x, y)`. Symmetric in `(x, y)` by construction: the squared distance
    /// uses `(x_i - y_i)^2`, which is bit-identical under argument swap.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check_args(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq = sq_dist(x, y);
        match self.family {
            KernelFamily::Gaussian { shape } => (-sq / shape).exp(),
            KernelFamily::WendlandC2 { support_radius } => {
                let q = sq.sqrt() / support_radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - q;
                    let s2 = s * s;
                    s2 * s2 * (4.0 * q + 1.0)
                }
            }
            KernelFamily::WendlandC4 { support_radius } => {
                let q = sq.sqrt() / support_radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - q;
                    let s2 = s * s;
                    let s3 = s2 * s;
                    s3 * s3 * (35.0 * q * q + 18.0 * q + 3.0) / 3.0
                }
            }
        }
    }

    /// Gradient of `K(., y)` with respect to the first argument, at `x`.
    ///
    /// For every family the radial profile gives `grad = g(q) * (x - y)` with
    /// a scalar factor that stays bounded as `x -> y`, so the gradient is
    /// exactly zero at the center.
    pub fn grad_first(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.check_args(x, y)?;
        Ok(self.grad_first_unchecked(x, y))
    }

    pub(crate) fn grad_first_unchecked(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let sq = sq_dist(x, y);
        // factor such that grad_i = factor * (x_i - y_i)
        let factor = match self.family {
            KernelFamily::Gaussian { shape } => -2.0 / shape * (-sq / shape).exp(),
            KernelFamily::WendlandC2 { support_radius } => {
                let q = sq.sqrt() / support_radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - q;
                    -20.0 * s * s * s / (support_radius * support_radius)
                }
            }
            KernelFamily::WendlandC4 { support_radius } => {
                let q = sq.sqrt() / support_radius;
                if q >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - q;
                    let s2 = s * s;
                    -56.0 / 3.0 * (5.0 * q + 1.0) * s2 * s2 * s
                        / (support_radius * support_radius)
                }
            }
        };
        x.iter().zip(y).map(|(xi, yi)| factor * (xi - yi)).collect()
    }

    /// Gram matrix `G[i][j] = K(points[i], points[j])`. Symmetric by
    /// construction (each off-diagonal entry is computed once and mirrored).
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>, KernelError> {
        if points.is_empty() {
            return Err(KernelError::EmptyPoints);
        }
        for p in points {
            self.check_args(p, p)?;
        }
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = self.phi0();
            for j in (i + 1)..n {
                let v = self.eval_unchecked(&points[i], &points[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Adds the standard diagonal jitter `1e-10 * phi0` to a Gram matrix. The
/// diagonal of a radial Gram is constant `phi0`, so the scale is read off
/// the first entry.
pub fn jittered(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = gram.clone();
    let jitter = GRAM_JITTER_REL * gram[(0, 0)];
    for i in 0..g.nrows() {
        g[(i, i)] += jitter;
    }
    g
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    DVector::from_vec(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_families(dim: usize) -> Vec<KernelConfig> {
        vec![
            KernelConfig::gaussian(1.0, dim).unwrap(),
            KernelConfig::wendland_c2(1.5, dim).unwrap(),
            KernelConfig::wendland_c4(1.5, dim).unwrap(),
        ]
    }

    #[test]
    fn gaussian_identity_is_one() {
        let k = KernelConfig::gaussian(1.0, 2).unwrap();
        let x = [0.3, -0.2];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_separation() {
        let k = KernelConfig::gaussian(1.0, 1).unwrap();
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 0.36787944117144233, max_relative = 1e-12);
    }

    #[test]
    fn wendland_c2_half_separation() {
        // (1 - 0.5)^4 * (4*0.5 + 1) = 0.1875, hand evaluation
        let k = KernelConfig::wendland_c2(1.0, 1).unwrap();
        let v = k.eval(&[0.0], &[0.5]).unwrap();
        assert_relative_eq!(v, 0.1875, max_relative = 1e-14);
    }

    #[test]
    fn wendland_compact_support_exact_zero() {
        for dim in [1usize, 3] {
            let rho = 0.7;
            for k in [
                KernelConfig::wendland_c2(rho, dim).unwrap(),
                KernelConfig::wendland_c4(rho, dim).unwrap(),
            ] {
                let x = vec![0.0; dim];
                let mut y = vec![0.0; dim];
                y[0] = rho; // exactly on the support boundary
                assert_eq!(k.eval(&x, &y).unwrap(), 0.0);
                y[0] = rho + 0.3;
                assert_eq!(k.eval(&x, &y).unwrap(), 0.0);
                assert!(k.grad_first(&x, &y).unwrap().iter().all(|&g| g == 0.0));
            }
        }
    }

    #[test]
    fn phi0_is_one_and_matches_eval_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in all_families(3) {
            assert_eq!(k.phi0(), 1.0);
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                assert_eq!(k.eval(&x, &x).unwrap(), k.phi0());
            }
        }
    }

    #[test]
    fn eval_bounded_by_phi0() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in all_families(4) {
            for _ in 0..200 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = k.eval(&x, &y).unwrap();
                assert!(v >= 0.0 && v <= k.phi0(), "{v} out of range for {k:?}");
            }
        }
    }

    #[test]
    fn grad_vanishes_at_center() {
        for k in all_families(3) {
            let x = [0.4, -0.1, 0.9];
            let g = k.grad_first(&x, &x).unwrap();
            assert!(g.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn gaussian_grad_closed_form() {
        // d/dx exp(-(x-1)^2) at x=0 is 2*exp(-1); central difference with
        // step 1e-5 agrees to 1e-6
        let k = KernelConfig::gaussian(1.0, 1).unwrap();
        let g = k.grad_first(&[0.0], &[1.0]).unwrap();
        assert_relative_eq!(g[0], 0.7357588823428847, max_relative = 1e-12);
        let h = 1e-5;
        let fd = (k.eval(&[h], &[1.0]).unwrap() - k.eval(&[-h], &[1.0]).unwrap()) / (2.0 * h);
        assert!((g[0] - fd).abs() <= 1e-6);
    }

    #[test]
    fn grad_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = 1e-5;
        for k in all_families(4) {
            for _ in 0..50 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let g = k.grad_first(&x, &y).unwrap();
                let scale = 1.0 + g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                for i in 0..4 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd =
                        (k.eval(&xp, &y).unwrap() - k.eval(&xm, &y).unwrap()) / (2.0 * h);
                    assert!(
                        (g[i] - fd).abs() <= 1e-5 * scale,
                        "family {:?}: analytic {} vs fd {}",
                        k.family(),
                        g[i],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn gram_single_point() {
        let k = KernelConfig::gaussian(0.5, 2).unwrap();
        let g = k.gram(&[vec![0.1, 0.2]]).unwrap();
        assert_eq!(g.nrows(), 1);
        assert_eq!(g[(0, 0)], 1.0);
    }

    #[test]
    fn gram_repeated_point_is_singular() {
        let k = KernelConfig::gaussian(1.0, 1).unwrap();
        let g = k.gram(&[vec![0.3], vec![0.3]]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert!(g.determinant().abs() < 1e-15);
    }

    #[test]
    fn gram_numerically_psd() {
        // dense symmetric eigensolve oracle on 50 random points
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let k = KernelConfig::gaussian(0.5, 3).unwrap();
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let g = k.gram(&pts).unwrap();
        let ev = symmetric_eigenvalues(&g);
        assert!(ev[0] >= -1e-8, "min eigenvalue {}", ev[0]);
    }

    #[test]
    fn gram_dimension_mismatch() {
        let k = KernelConfig::gaussian(1.0, 2).unwrap();
        let err = k.gram(&[vec![0.0, 0.0], vec![1.0]]).unwrap_err();
        assert_eq!(
            err,
            KernelError::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn eval_rejects_non_finite() {
        let k = KernelConfig::gaussian(1.0, 1).unwrap();
        assert_eq!(
            k.eval(&[f64::NAN], &[0.0]).unwrap_err(),
            KernelError::NonFiniteInput
        );
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(KernelConfig::gaussian(0.0, 1).is_err());
        assert!(KernelConfig::gaussian(-1.0, 1).is_err());
        assert!(KernelConfig::wendland_c2(0.0, 1).is_err());
        assert!(KernelConfig::gaussian(1.0, 0).is_err());
    }
}
