//! Solver-versus-brute-force checks on randomly generated desk-scale
//! programs, plus candidate dominance against independently constructed
//! feasible points.

use nalgebra::{DMatrix, DVector};
use okoc_core::assembly::FiniteProgram;
use okoc_core::oracle::grid_search_min;
use okoc_core::solver::{kkt_residuals, solve, SolveOptions, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random well-conditioned program with `m_s + m_d <= 3` variables and up
/// to 2 equality rows. Feasible by construction: the right-hand side is the
/// image of an interior point.
fn random_program(rng: &mut ChaCha8Rng) -> FiniteProgram {
    let shapes: [(usize, usize); 6] = [(1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (1, 2)];
    let (m_s, m_d) = shapes[rng.gen_range(0..shapes.len())];
    let dim = m_s + m_d;
    let m_b = if dim == 3 {
        rng.gen_range(1..=2)
    } else {
        rng.gen_range(0..=dim.min(2))
    };
    let well_conditioned_gram = |rng: &mut ChaCha8Rng, k: usize| -> DMatrix<f64> {
        if k == 0 {
            return DMatrix::zeros(0, 0);
        }
        let raw = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-0.5..0.5));
        raw.transpose() * raw + DMatrix::identity(k, k)
    };
    let g_s = well_conditioned_gram(rng, m_s);
    let g_d = well_conditioned_gram(rng, m_d);
    let r_s = rng.gen_range(0.4..1.0);
    let r_d = rng.gen_range(0.4..1.0);
    let c = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    // rows keep a solid coefficient on the last variable so the oracle's
    // interval pruning stays sharp
    let mut a = DMatrix::from_fn(m_b, dim, |_, _| rng.gen_range(-1.0..1.0));
    for row in 0..m_b {
        let v: f64 = rng.gen_range(0.4..1.0);
        a[(row, dim - 1)] = if rng.gen_bool(0.5) { v } else { -v };
    }
    // interior point: scaled into 60% of each ball
    let mut interior = DVector::from_fn(dim, |_, _| rng.gen_range(-0.5..0.5));
    let shrink = |block: &mut nalgebra::DVectorViewMut<f64>, g: &DMatrix<f64>, r: f64| {
        if block.is_empty() {
            return;
        }
        let owned = DVector::from(block.clone_owned());
        let q = (g * &owned).dot(&owned);
        if q > 0.36 * r {
            let scale = (0.36 * r / q).sqrt();
            block.scale_mut(scale);
        }
    };
    shrink(&mut interior.rows_mut(0, m_s), &g_s, r_s);
    shrink(&mut interior.rows_mut(m_s, m_d), &g_d, r_d);
    let b = &a * &interior;
    FiniteProgram::from_parts(c, a, b, g_s, g_d, r_s, r_d, m_s, m_d)
}

#[test]
fn solver_matches_grid_oracle_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let opts = SolveOptions::default();
    for trial in 0..12 {
        let p = random_program(&mut rng);
        let res = solve(&p, &opts).unwrap();
        assert_eq!(
            res.status,
            SolveStatus::Optimal,
            "trial {trial}: {:?}",
            res.status
        );
        let oracle = grid_search_min(&p, 1e-3, 2e-3).expect("oracle found feasible points");
        assert!(
            (res.objective - oracle).abs() <= 5e-3,
            "trial {trial}: solver {} vs oracle {}",
            res.objective,
            oracle
        );
        let (eq, stat, comp) = kkt_residuals(&p, &res).unwrap();
        assert!(eq <= 1e-6 && stat <= 1e-6 && comp <= 1e-5, "{eq} {stat} {comp}");
    }
}

#[test]
fn solver_dominates_projected_feasible_candidates() {
    // alternating projections onto {Az = b} and the balls produce feasible
    // points independent of the solver; none may beat it by more than the
    // stationarity budget
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let opts = SolveOptions::default();
    for _ in 0..8 {
        let p = random_program(&mut rng);
        if p.num_rows() == 0 {
            continue;
        }
        let res = solve(&p, &opts).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let c_norm = p.objective().norm();
        for _ in 0..5 {
            let dim = p.num_s() + p.num_d();
            let mut z = DVector::from_fn(dim, |_, _| rng.gen_range(-0.6..0.6));
            let a = p.constraints();
            let aat = a * a.transpose();
            let chol = match aat.clone().cholesky() {
                Some(c) => c,
                None => continue,
            };
            let mut feasible = false;
            for _ in 0..2000 {
                // affine projection then ball projection
                let resid = a * &z - p.rhs();
                let y = chol.solve(&resid);
                z -= a.transpose() * y;
                let w = okoc_core::solver::project_ellipsoid(
                    &DVector::from(z.rows(0, p.num_s())),
                    p.gram_s(),
                    p.radius_s(),
                )
                .unwrap();
                z.rows_mut(0, p.num_s()).copy_from(&w);
                if p.num_d() > 0 {
                    let v = okoc_core::solver::project_ellipsoid(
                        &DVector::from(z.rows(p.num_s(), p.num_d())),
                        p.gram_d(),
                        p.radius_d(),
                    )
                    .unwrap();
                    z.rows_mut(p.num_s(), p.num_d()).copy_from(&v);
                }
                let eq = (a * &z - p.rhs()).amax();
                if eq <= 1e-9 {
                    feasible = true;
                    break;
                }
            }
            if !feasible {
                continue;
            }
            let cand_obj = p.objective().dot(&z);
            assert!(
                res.objective <= cand_obj + opts.stat_tol * (1.0 + c_norm),
                "feasible candidate beats solver: {cand_obj} < {}",
                res.objective
            );
        }
    }
}
