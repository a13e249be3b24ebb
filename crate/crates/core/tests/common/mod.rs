#![allow(dead_code)]

use dppscreen::data::{generate_synthetic, Correlation, SyntheticSpec};
use dppscreen::solver::{self, SolverConfig};
use dppscreen::{Dataset, GroupLayout, LambdaGrid, PrimalSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gap tolerance of the reference solves every screened result is judged against.
pub const REFERENCE_GAP: f64 = 1e-12;

pub fn reference_cfg() -> SolverConfig {
    SolverConfig {
        gap_tol: REFERENCE_GAP,
        max_iters: 1_000_000,
        ..SolverConfig::default()
    }
}

/// Random Lasso instance: N in `n_range`, p in `p_range`, IID or AR1(0.5) columns.
pub fn random_instance(seed: u64, n_range: (usize, usize), p_range: (usize, usize)) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.gen_range(n_range.0..=n_range.1);
    let p = rng.gen_range(p_range.0..=p_range.1);
    let nnz = rng.gen_range(1..=(n / 2).clamp(1, p));
    let corr = if rng.gen_bool(0.5) { Correlation::Iid } else { Correlation::Ar1(0.5) };
    let spec = SyntheticSpec::new(n, p, nnz, 0.1, seed).with_correlation(corr);
    generate_synthetic(&spec).expect("valid spec").0
}

/// Random grouped instance with `G` groups of sizes in `1..=max_size`.
pub fn random_grouped(seed: u64, g_range: (usize, usize), max_size: usize) -> (Dataset, GroupLayout) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a0b);
    let n_groups = rng.gen_range(g_range.0..=g_range.1);
    let sizes: Vec<usize> = (0..n_groups).map(|_| rng.gen_range(1..=max_size)).collect();
    let p: usize = sizes.iter().sum();
    let n = rng.gen_range(10..=40);
    let nnz = rng.gen_range(1..=(n_groups / 3).max(1));
    let corr = if rng.gen_bool(0.5) { Correlation::Iid } else { Correlation::Ar1(0.5) };
    let spec = SyntheticSpec::new(n, p, nnz, 0.1, seed)
        .with_correlation(corr)
        .with_groups(sizes.clone());
    let d = generate_synthetic(&spec).expect("valid spec").0;
    (d, GroupLayout::new(sizes).expect("valid sizes"))
}

/// Unscreened warm-started path at `cfg`.
pub fn reference_path(d: &Dataset, g: Option<&GroupLayout>, grid: &LambdaGrid, cfg: &SolverConfig) -> Vec<PrimalSolution> {
    let mut out: Vec<PrimalSolution> = Vec::new();
    for &lambda in grid.values() {
        let warm = out.last().map(|s| s.beta.as_slice());
        let s = match g {
            None => solver::solve_lasso(d, lambda, warm, cfg),
            Some(g) => solver::solve_group_lasso(d, g, lambda, warm, cfg),
        }
        .unwrap_or_else(|e| panic!("reference solve at lambda {lambda}: {e}"));
        out.push(s);
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
