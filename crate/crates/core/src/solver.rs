//! Lasso and group-Lasso solvers terminated on a certified duality gap.
//!
//! Lasso uses cyclic coordinate descent with exact per-coordinate
//! minimisation. Group Lasso uses FISTA with a power-iteration Lipschitz
//! estimate. Both accept a restricted set of columns (or groups) so the
//! screening drivers can solve reduced problems without copying `X`.

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, norm2_sq};
use crate::types::{Dataset, DualPoint, GroupLayout, PrimalSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Target duality gap relative to `½‖y‖²`.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// The gap is evaluated after the first sweep and then every `check_every` sweeps.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            max_iters: 100_000,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn with_gap_tol(gap_tol: f64) -> Self {
        Self {
            gap_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.gap_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("gap_tol must be positive, got {}", self.gap_tol)));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidArgument("max_iters and check_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Absolute gap target for a given dataset.
    pub fn absolute_target(&self, d: &Dataset) -> f64 {
        self.gap_tol * 0.5 * d.y_norm() * d.y_norm()
    }
}

/// Proximal map of `t|·|`: `sign(z)·max(|z| − t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `½‖y − Xβ‖² + λ‖β‖₁`
pub fn lasso_objective(d: &Dataset, beta: &[f64], lambda: f64) -> f64 {
    0.5 * norm2_sq(&d.residual(beta)) + lambda * linalg::l1(beta)
}

/// `½‖y − Xβ‖² + λ Σ_g √n_g ‖β_g‖`
pub fn group_lasso_objective(d: &Dataset, g: &GroupLayout, beta: &[f64], lambda: f64) -> f64 {
    0.5 * norm2_sq(&d.residual(beta)) + lambda * group_penalty(g, beta)
}

fn group_penalty(g: &GroupLayout, beta: &[f64]) -> f64 {
    (0..g.n_groups())
        .map(|k| g.weight(k) * norm2(&beta[g.range(k)]))
        .sum()
}

/// Dual objective `½‖y‖² − (λ²/2)‖θ − y/λ‖²`, shared by Lasso and group Lasso.
pub fn dual_objective(d: &Dataset, theta: &[f64], lambda: f64) -> f64 {
    let dist_sq: f64 = theta
        .iter()
        .zip(d.y())
        .map(|(t, y)| {
            let e = lambda * t - y;
            e * e
        })
        .sum();
    0.5 * d.y_norm() * d.y_norm() - 0.5 * dist_sq
}

/// Largest dual constraint value: `max_i |x_iᵀθ|`, or `max_g ‖X_gᵀθ‖/√n_g`.
pub fn dual_constraint_max(d: &Dataset, theta: &[f64], g: Option<&GroupLayout>) -> f64 {
    match g {
        None => (0..d.n_features())
            .map(|j| d.col_dot(j, theta).abs())
            .fold(0.0, f64::max),
        Some(g) => (0..g.n_groups())
            .map(|k| group_corr_norm(d, g, k, theta) / g.weight(k))
            .fold(0.0, f64::max),
    }
}

/// `‖X_gᵀ v‖₂`
pub fn group_corr_norm(d: &Dataset, g: &GroupLayout, k: usize, v: &[f64]) -> f64 {
    g.range(k)
        .map(|j| {
            let c = d.col_dot(j, v);
            c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// Shrinks `theta_hat` onto the dual feasible set along the ray to the origin:
/// returns `θ̂ / max(1, s)` where `s` is the largest constraint value.
pub fn scale_to_feasible(d: &Dataset, theta_hat: &[f64], lambda: f64, g: Option<&GroupLayout>) -> DualPoint {
    let s = dual_constraint_max(d, theta_hat, g);
    let theta = if s > 1.0 {
        let mut scale = s;
        loop {
            let t: Vec<f64> = theta_hat.iter().map(|v| v / scale).collect();
            // rounding can leave the tight constraint an ulp above 1
            if dual_constraint_max(d, &t, g) <= 1.0 {
                break t;
            }
            scale = scale.next_up();
        }
    } else {
        theta_hat.to_vec()
    };
    DualPoint {
        theta,
        lambda,
        feasibility_slack: s - 1.0,
    }
}

/// `θ = (y − Xβ)/λ`, scaled into the feasible set.
pub fn recover_dual_point(d: &Dataset, beta: &[f64], lambda: f64) -> DualPoint {
    let theta_hat = linalg::scaled(&d.residual(beta), 1.0 / lambda);
    scale_to_feasible(d, &theta_hat, lambda, None)
}

pub fn recover_group_dual_point(d: &Dataset, g: &GroupLayout, beta: &[f64], lambda: f64) -> DualPoint {
    let theta_hat = linalg::scaled(&d.residual(beta), 1.0 / lambda);
    scale_to_feasible(d, &theta_hat, lambda, Some(g))
}

/// Gap between the primal objective at `beta` and the dual objective at the
/// scaled residual. Always nonnegative.
pub fn compute_duality_gap(d: &Dataset, beta: &[f64], lambda: f64, g: Option<&GroupLayout>) -> f64 {
    let r = d.residual(beta);
    match g {
        None => {
            let all: Vec<usize> = (0..d.n_features()).collect();
            lasso_gap_on(d, &all, beta, &r, lambda)
        }
        Some(g) => {
            let all: Vec<usize> = (0..g.n_groups()).collect();
            group_gap_on(d, g, &all, beta, &r, lambda)
        }
    }
}

// With m = max(1, s) and θ = r/(λm), P − D simplifies (using rᵀy = ‖r‖² + rᵀXβ) to
//   ½‖r‖²(1 − 1/m)² + λ·pen(β) − (1/m)·Σ_j β_j x_jᵀr
// where every term vanishes at the optimum, so there is no cancellation of O(‖y‖²) terms.
fn lasso_gap_on(d: &Dataset, cols: &[usize], beta: &[f64], r: &[f64], lambda: f64) -> f64 {
    let mut s: f64 = 0.0;
    let mut beta_xtr = 0.0;
    let mut pen = 0.0;
    for &j in cols {
        let c = d.col_dot(j, r);
        s = s.max(c.abs());
        beta_xtr += beta[j] * c;
        pen += beta[j].abs();
    }
    let m = (s / lambda).max(1.0);
    let rr = norm2_sq(r);
    let shrink = 1.0 - 1.0 / m;
    (0.5 * rr * shrink * shrink + lambda * pen - beta_xtr / m).max(0.0)
}

fn group_gap_on(d: &Dataset, g: &GroupLayout, groups: &[usize], beta: &[f64], r: &[f64], lambda: f64) -> f64 {
    let mut s: f64 = 0.0;
    let mut beta_xtr = 0.0;
    let mut pen = 0.0;
    for &k in groups {
        let mut sq = 0.0;
        let mut bsq = 0.0;
        for j in g.range(k) {
            let c = d.col_dot(j, r);
            sq += c * c;
            beta_xtr += beta[j] * c;
            bsq += beta[j] * beta[j];
        }
        s = s.max(sq.sqrt() / g.weight(k));
        pen += g.weight(k) * bsq.sqrt();
    }
    let m = (s / lambda).max(1.0);
    let rr = norm2_sq(r);
    let shrink = 1.0 - 1.0 / m;
    (0.5 * rr * shrink * shrink + lambda * pen - beta_xtr / m).max(0.0)
}

fn residual_on(d: &Dataset, cols: &[usize], beta: &[f64]) -> Vec<f64> {
    let mut r = d.y().to_vec();
    for &j in cols {
        if beta[j] != 0.0 {
            linalg::axpy(-beta[j], d.col(j), &mut r);
        }
    }
    r
}

fn restrict_warm_start(p: usize, cols: &[usize], warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut beta = vec![0.0; p];
    if let Some(w) = warm_start {
        if w.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "warm start has length {}, expected {}",
                w.len(),
                p
            )));
        }
        for &j in cols {
            beta[j] = w[j];
        }
    }
    Ok(beta)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Solves the full Lasso problem.
pub fn solve_lasso(d: &Dataset, lambda: f64, warm_start: Option<&[f64]>, cfg: &SolverConfig) -> Result<PrimalSolution> {
    let all: Vec<usize> = (0..d.n_features()).collect();
    solve_lasso_subset(d, lambda, &all, warm_start, cfg)
}

/// Solves the Lasso restricted to `cols`; the returned `beta` is full length
/// with zeros outside `cols`, and the certified gap is that of the reduced problem.
pub fn solve_lasso_subset(
    d: &Dataset,
    lambda: f64,
    cols: &[usize],
    warm_start: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<PrimalSolution> {
    check_lambda(lambda)?;
    cfg.validate()?;
    let p = d.n_features();
    let reduced_lambda_max = cols.iter().map(|&j| d.col_dot(j, d.y()).abs()).fold(0.0, f64::max);
    if lambda >= reduced_lambda_max {
        return Ok(PrimalSolution::zero(p, lambda));
    }
    let mut cd = CoordinateDescent::new(d, lambda, cols, warm_start)?;
    let target = cfg.absolute_target(d);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for sweep in 1..=cfg.max_iters {
        cd.sweep();
        if sweep == 1 || sweep % cfg.check_every == 0 || sweep == cfg.max_iters {
            let gap = cd.refresh_and_gap();
            if gap <= target {
                return Ok(PrimalSolution {
                    beta: cd.beta,
                    lambda,
                    duality_gap: gap,
                    iterations: sweep,
                });
            }
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((gap, cd.beta.clone()));
            }
        }
    }
    let (gap, beta) = best.expect("at least one gap evaluation");
    Err(Error::MaxItersExceeded {
        iters: cfg.max_iters,
        gap,
        target,
        best: Box::new(PrimalSolution {
            beta,
            lambda,
            duality_gap: gap,
            iterations: cfg.max_iters,
        }),
    })
}

/// Cyclic coordinate descent state over a column subset.
pub(crate) struct CoordinateDescent<'a> {
    d: &'a Dataset,
    lambda: f64,
    cols: Vec<usize>,
    norms_sq: Vec<f64>,
    beta: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub(crate) fn new(d: &'a Dataset, lambda: f64, cols: &[usize], warm_start: Option<&[f64]>) -> Result<Self> {
        let beta = restrict_warm_start(d.n_features(), cols, warm_start)?;
        let r = residual_on(d, cols, &beta);
        let norms_sq = cols.iter().map(|&j| d.col_norms()[j] * d.col_norms()[j]).collect();
        Ok(Self {
            d,
            lambda,
            cols: cols.to_vec(),
            norms_sq,
            beta,
            r,
        })
    }

    /// One cyclic pass; returns the primal objective afterwards.
    pub(crate) fn sweep(&mut self) -> f64 {
        for (k, &j) in self.cols.iter().enumerate() {
            let nsq = self.norms_sq[k];
            if nsq == 0.0 {
                self.beta[j] = 0.0;
                continue;
            }
            let col = self.d.col(j);
            let old = self.beta[j];
            let z = dot(col, &self.r) + nsq * old;
            let new = soft_threshold(z, self.lambda) / nsq;
            if new != old {
                linalg::axpy(old - new, col, &mut self.r);
                self.beta[j] = new;
            }
        }
        self.objective()
    }

    pub(crate) fn objective(&self) -> f64 {
        let pen: f64 = self.cols.iter().map(|&j| self.beta[j].abs()).sum();
        0.5 * norm2_sq(&self.r) + self.lambda * pen
    }

    /// Recomputes the residual from scratch (removing update drift) and
    /// evaluates the reduced duality gap.
    fn refresh_and_gap(&mut self) -> f64 {
        self.r = residual_on(self.d, &self.cols, &self.beta);
        lasso_gap_on(self.d, &self.cols, &self.beta, &self.r, self.lambda)
    }
}

/// Largest eigenvalue of `X_Aᵀ X_A` over the column subset `cols`, by power iteration.
pub fn power_iteration_gram(d: &Dataset, cols: &[usize], steps: usize, tol: f64) -> f64 {
    power_iteration_gram_checked(d, cols, steps, tol).0
}

/// As [`power_iteration_gram`], also reporting whether the tolerance was met
/// within `steps`. The estimate is a Rayleigh quotient, so it never exceeds
/// the true eigenvalue.
pub fn power_iteration_gram_checked(d: &Dataset, cols: &[usize], steps: usize, tol: f64) -> (f64, bool) {
    if cols.is_empty() {
        return (0.0, true);
    }
    let n = d.n_samples();
    let mut v = vec![1.0 / (cols.len() as f64).sqrt(); cols.len()];
    let mut estimate = 0.0;
    for _ in 0..steps {
        let mut xv = vec![0.0; n];
        for (k, &j) in cols.iter().enumerate() {
            linalg::axpy(v[k], d.col(j), &mut xv);
        }
        let w: Vec<f64> = cols.iter().map(|&j| d.col_dot(j, &xv)).collect();
        let nw = norm2(&w);
        if nw == 0.0 {
            return (0.0, true);
        }
        let next = dot(&v, &w);
        v = w.iter().map(|x| x / nw).collect();
        let converged = (next - estimate).abs() <= tol * next.abs();
        estimate = next;
        if converged {
            return (estimate, true);
        }
    }
    (estimate, false)
}

/// Solves the full group Lasso problem.
pub fn solve_group_lasso(
    d: &Dataset,
    g: &GroupLayout,
    lambda: f64,
    warm_start: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<PrimalSolution> {
    let all: Vec<usize> = (0..g.n_groups()).collect();
    solve_group_lasso_subset(d, g, lambda, &all, warm_start, cfg)
}

/// Group Lasso restricted to the listed groups (FISTA with adaptive restart).
pub fn solve_group_lasso_subset(
    d: &Dataset,
    g: &GroupLayout,
    lambda: f64,
    groups: &[usize],
    warm_start: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<PrimalSolution> {
    check_lambda(lambda)?;
    cfg.validate()?;
    g.check_features(d.n_features())?;
    let p = d.n_features();
    let reduced_lambda_max = groups
        .iter()
        .map(|&k| group_corr_norm(d, g, k, d.y()) / g.weight(k))
        .fold(0.0, f64::max);
    if lambda >= reduced_lambda_max {
        return Ok(PrimalSolution::zero(p, lambda));
    }
    let cols: Vec<usize> = groups.iter().flat_map(|&k| g.range(k)).collect();
    let target = cfg.absolute_target(d);

    // Step 1/L; the power-iteration estimate is a lower bound on the true
    // Lipschitz constant, so a backtracking check doubles it when violated.
    let mut lip = power_iteration_gram(d, &cols, 30, 1e-10).max(f64::MIN_POSITIVE);

    let mut beta = restrict_warm_start(p, &cols, warm_start)?;
    let mut extrap = beta.clone();
    let mut t = 1.0_f64;
    let mut best: Option<(f64, Vec<f64>)> = None;

    for iter in 1..=cfg.max_iters {
        let r_ext = residual_on(d, &cols, &extrap);
        let f_ext = 0.5 * norm2_sq(&r_ext);
        // gradient of the smooth part at the extrapolated point: −Xᵀr
        let grad: Vec<(usize, f64)> = cols.iter().map(|&j| (j, -d.col_dot(j, &r_ext))).collect();

        let next = loop {
            let mut cand = vec![0.0; p];
            for &(j, gj) in &grad {
                cand[j] = extrap[j] - gj / lip;
            }
            for &k in groups {
                block_soft_threshold(&mut cand[g.range(k)], lambda * g.weight(k) / lip);
            }
            let r_c = residual_on(d, &cols, &cand);
            let f_c = 0.5 * norm2_sq(&r_c);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for &(j, gj) in &grad {
                let diff = cand[j] - extrap[j];
                lin += gj * diff;
                quad += diff * diff;
            }
            let bound = f_ext + lin + 0.5 * lip * quad;
            if f_c <= bound + 1e-12 * f_ext.abs().max(1.0) || lip > 1e300 {
                break cand;
            }
            lip *= 2.0;
        };

        // gradient-mapping restart: drop momentum when the step opposes the
        // previous direction of travel
        let opposing: f64 = cols
            .iter()
            .map(|&j| (extrap[j] - next[j]) * (next[j] - beta[j]))
            .sum();
        let t_next = if opposing > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let mom = if opposing > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        extrap = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| a + mom * (a - b))
            .collect();
        t = t_next;
        beta = next;

        if iter == 1 || iter % cfg.check_every == 0 || iter == cfg.max_iters {
            let r = residual_on(d, &cols, &beta);
            let gap = group_gap_on(d, g, groups, &beta, &r, lambda);
            if gap <= target {
                return Ok(PrimalSolution {
                    beta,
                    lambda,
                    duality_gap: gap,
                    iterations: iter,
                });
            }
            if best.as_ref().is_none_or(|(b, _)| gap < *b) {
                best = Some((gap, beta.clone()));
            }
        }
    }
    let (gap, beta) = best.expect("at least one gap evaluation");
    Err(Error::MaxItersExceeded {
        iters: cfg.max_iters,
        gap,
        target,
        best: Box::new(PrimalSolution {
            beta,
            lambda,
            duality_gap: gap,
            iterations: cfg.max_iters,
        }),
    })
}

/// In-place `max(0, 1 − t/‖z‖)·z`.
pub fn block_soft_threshold(z: &mut [f64], t: f64) {
    let nz = norm2(z);
    let scale = if nz > t { 1.0 - t / nz } else { 0.0 };
    for v in z.iter_mut() {
        *v *= scale;
    }
}
