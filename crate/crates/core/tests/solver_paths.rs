mod common;

use common::*;
use dppscreen::linalg::norm2;
use dppscreen::oracle;
use dppscreen::screening;
use dppscreen::solver::{self, SolverConfig};
use dppscreen::{BallMethod, DualPoint, GroupLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn cd_matches_proximal_gradient_oracle() {
    for seed in 0..5u64 {
        let spec = dppscreen::data::SyntheticSpec::new(10, 20, 4, 0.1, 100 + seed);
        let d = dppscreen::data::generate_synthetic(&spec).unwrap().0;
        let lambda = 0.3 * screening::lambda_max(&d).unwrap().0;
        let cd = solver::solve_lasso(&d, lambda, None, &reference_cfg()).unwrap();
        let pg = oracle::proximal_gradient_lasso(&d, lambda, 1e-12, 2_000_000).unwrap();
        let diff = max_abs_diff(&cd.beta, &pg.beta);
        assert!(diff <= 1e-6, "seed {seed}: CD and proximal gradient differ by {diff:e}");
    }
}

#[test]
fn every_returned_solution_is_certified() {
    let cfg = SolverConfig::default();
    for seed in 0..20u64 {
        let d = random_instance(seed, (10, 40), (10, 60));
        let lmax = screening::lambda_max(&d).unwrap().0;
        let target = cfg.absolute_target(&d);
        for frac in [0.9, 0.5, 0.1] {
            let s = solver::solve_lasso(&d, frac * lmax, None, &cfg).unwrap();
            let gap = solver::compute_duality_gap(&d, &s.beta, frac * lmax, None);
            assert!(gap <= target, "seed {seed} frac {frac}: gap {gap:e} > {target:e}");
        }
        let (dg, g) = random_grouped(seed, (5, 15), 4);
        let glmax = screening::group_lambda_max(&dg, &g).unwrap().0;
        let s = solver::solve_group_lasso(&dg, &g, 0.4 * glmax, None, &cfg).unwrap();
        let gap = solver::compute_duality_gap(&dg, &s.beta, 0.4 * glmax, Some(&g));
        assert!(gap <= cfg.absolute_target(&dg));
    }
}

#[test]
fn reduced_problem_after_safe_screen_matches_full_objective() {
    let cfg = reference_cfg();
    for seed in 0..20u64 {
        let d = random_instance(200 + seed, (15, 40), (20, 60));
        let lmax = screening::lambda_max(&d).unwrap().0;
        let lambda = 0.5 * lmax;
        let theta0 = DualPoint {
            theta: d.y().iter().map(|v| v / lmax).collect(),
            lambda: lmax,
            feasibility_slack: 0.0,
        };
        let ball = screening::estimate_dual_ball(BallMethod::Edpp, &d, &theta0, lmax, lambda).unwrap();
        let mask = screening::screen_with_ball(&d, &ball);
        let kept = mask.kept();
        let full = solver::solve_lasso(&d, lambda, None, &cfg).unwrap();
        let reduced = solver::solve_lasso_subset(&d, lambda, &kept, None, &cfg).unwrap();
        assert!(reduced.beta.iter().enumerate().all(|(i, b)| !mask.discard[i] || *b == 0.0));
        let pf = solver::lasso_objective(&d, &full.beta, lambda);
        let pr = solver::lasso_objective(&d, &reduced.beta, lambda);
        assert!((pf - pr).abs() <= 1e-9, "seed {seed}: objectives {pf} vs {pr}");
    }
}

#[test]
fn gap_at_zero_matches_direct_evaluation() {
    for seed in 0..10u64 {
        let d = random_instance(300 + seed, (10, 30), (10, 40));
        let lmax = screening::lambda_max(&d).unwrap().0;
        let zero = vec![0.0; d.n_features()];
        assert!(solver::compute_duality_gap(&d, &zero, lmax, None) <= 1e-12);
        let half = 0.5 * lmax;
        let gap = solver::compute_duality_gap(&d, &zero, half, None);
        let direct = oracle::direct_duality_gap(&d, &zero, half);
        assert!(gap > 0.0);
        assert!((gap - direct).abs() <= 1e-10 * direct.max(1.0), "{gap} vs {direct}");
    }
}

#[test]
fn recovered_dual_points_are_feasible() {
    let cfg = SolverConfig::default();
    for seed in 0..20u64 {
        let d = random_instance(400 + seed, (10, 40), (10, 60));
        let lambda = 0.2 * screening::lambda_max(&d).unwrap().0;
        let s = solver::solve_lasso(&d, lambda, None, &cfg).unwrap();
        let theta = solver::recover_dual_point(&d, &s.beta, lambda);
        let worst = (0..d.n_features()).map(|j| d.col_dot(j, &theta.theta).abs()).fold(0.0, f64::max);
        assert!(worst <= 1.0, "seed {seed}: max |x_iᵀθ| = {worst}");
    }
}

#[test]
fn scaling_an_infeasible_point_makes_one_constraint_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20u64 {
        let d = random_instance(500 + seed, (10, 30), (10, 40));
        let theta: Vec<f64> = (0..d.n_samples()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let before = solver::dual_constraint_max(&d, &theta, None);
        if before <= 1.0 {
            continue;
        }
        let out = solver::scale_to_feasible(&d, &theta, 1.0, None);
        let after = solver::dual_constraint_max(&d, &out.theta, None);
        assert!((1.0 - 1e-12..=1.0).contains(&after), "max constraint {after}");
    }
}

#[test]
fn group_solver_zero_above_lambda_max_and_singletons_match_lasso() {
    let cfg = SolverConfig::with_gap_tol(1e-14);
    for seed in 0..10u64 {
        let (d, g) = random_grouped(600 + seed, (5, 20), 5);
        let glmax = screening::group_lambda_max(&d, &g).unwrap().0;
        for f in [1.0, 1.5] {
            let s = solver::solve_group_lasso(&d, &g, f * glmax, None, &cfg).unwrap();
            assert!(s.beta.iter().all(|b| *b == 0.0));
        }
    }
    let spec = dppscreen::data::SyntheticSpec::new(40, 8, 3, 0.1, 9);
    let d = dppscreen::data::generate_synthetic(&spec).unwrap().0;
    let g = GroupLayout::singletons(8);
    let lambda = 0.3 * screening::lambda_max(&d).unwrap().0;
    let a = solver::solve_lasso(&d, lambda, None, &cfg).unwrap();
    let b = solver::solve_group_lasso(&d, &g, lambda, None, &cfg).unwrap();
    assert!(max_abs_diff(&a.beta, &b.beta) <= 1e-8);
}

#[test]
fn strong_duality_at_optimum() {
    for seed in 0..10u64 {
        let d = random_instance(700 + seed, (10, 30), (10, 40));
        let lambda = 0.25 * screening::lambda_max(&d).unwrap().0;
        let s = solver::solve_lasso(&d, lambda, None, &reference_cfg()).unwrap();
        let theta = solver::recover_dual_point(&d, &s.beta, lambda);
        let p = solver::lasso_objective(&d, &s.beta, lambda);
        let dual = solver::dual_objective(&d, &theta.theta, lambda);
        assert!(p - dual <= 1e-8 && p - dual >= -1e-10);
        // KKT: active features have |x_iᵀθ| = 1
        for (j, b) in s.beta.iter().enumerate() {
            if *b != 0.0 {
                assert!((d.col_dot(j, &theta.theta).abs() - 1.0).abs() < 1e-5);
            }
        }
        assert!(norm2(&theta.theta) <= norm2(d.y()) / lambda + 1e-9);
    }
}
