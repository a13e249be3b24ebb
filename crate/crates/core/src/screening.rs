//! Screening rules for the Lasso and group Lasso.
//!
//! Every safe rule follows the same recipe: bound the dual optimum `θ*(λ)`
//! inside a ball `B(c, ρ)` built from a dual point known at `λ_0 ≥ λ`, then
//! discard feature `i` when `|x_iᵀc| < 1 − ρ‖x_i‖` (for a group,
//! `‖X_gᵀc‖ < √n_g − ρ‖X_g‖₂`). The rules differ only in the ball:
//!
//! | rule  | center                         | radius                       |
//! |-------|--------------------------------|------------------------------|
//! | DPP   | `θ0`                           | `|1/λ − 1/λ0|·‖y‖`           |
//! | IMP1  | `θ0`                           | `‖v2⊥‖`                      |
//! | IMP2  | `θ0 + ½(1/λ − 1/λ0)·y`         | `½|1/λ − 1/λ0|·‖y‖`          |
//! | EDPP  | `θ0 + ½·v2⊥`                   | `½‖v2⊥‖`                     |
//! | SAFE  | `y/λ`                          | `‖y/λ − θ0‖`                 |
//!
//! `v1` is the direction of the ray `y/λ0 − θ0` whose points all project to
//! `θ0` (at `λ0 = λ_max` it is the normal `sign(x*ᵀy)·x*` of the active
//! constraint), `v2 = y/λ − θ0` and `v2⊥` is the part of `v2` orthogonal to `v1`.
//!
//! With `λ0 = λ_max` and `θ0 = y/λ_max` the SAFE row reduces to the classic
//! basic SAFE test.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, norm2_sq};
use crate::solver::{self, SolverConfig};
use crate::types::{BallEstimate, BallMethod, Dataset, DualPoint, GroupLayout, LambdaGrid, PrimalSolution, Rule, ScreenMask};

/// Relative tolerance for deciding `λ0 = λ_max`.
pub const LAMBDA_MAX_REL_TOL: f64 = 1e-12;

/// Slack allowed on `|x_iᵀθ̂| ≤ 1` when re-checking KKT after strong-rule screening.
pub const KKT_TOL: f64 = 1e-7;

/// `(max_i |x_iᵀy|, smallest maximising index)`.
pub fn lambda_max(d: &Dataset) -> Result<(f64, usize)> {
    argmax_abs(&d.xt_mul(d.y()))
}

fn argmax_abs(v: &[f64]) -> Result<(f64, usize)> {
    let mut best = 0.0;
    let mut idx = 0;
    for (i, c) in v.iter().enumerate() {
        if c.abs() > best {
            best = c.abs();
            idx = i;
        }
    }
    if best == 0.0 {
        return Err(Error::DegenerateResponse);
    }
    Ok((best, idx))
}

/// `(max_g ‖X_gᵀy‖/√n_g, smallest maximising group)`.
pub fn group_lambda_max(d: &Dataset, g: &GroupLayout) -> Result<(f64, usize)> {
    g.check_features(d.n_features())?;
    let xty = d.xt_mul(d.y());
    group_argmax(g, &xty)
}

fn group_scores(g: &GroupLayout, corr: &[f64]) -> Vec<f64> {
    (0..g.n_groups())
        .map(|k| norm2(&corr[g.range(k)]) / g.weight(k))
        .collect()
}

fn group_argmax(g: &GroupLayout, corr: &[f64]) -> Result<(f64, usize)> {
    argmax_abs(&group_scores(g, corr))
}

fn at_lambda_max(lambda0: f64, lambda_max: f64) -> bool {
    (lambda0 / lambda_max - 1.0).abs() <= LAMBDA_MAX_REL_TOL
}

/// Vectors defining the ray-projection estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct VGeometry {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v2_perp: Vec<f64>,
    pub lambda0: f64,
    pub lambda: f64,
}

impl VGeometry {
    /// Builds `v2 = y/λ − θ0` and its component orthogonal to `v1`.
    pub fn from_v1(y: &[f64], theta0: &[f64], v1: Vec<f64>, lambda0: f64, lambda: f64) -> Result<Self> {
        let v1_sq = norm2_sq(&v1);
        if v1_sq == 0.0 {
            return Err(Error::DegenerateV1);
        }
        let v2: Vec<f64> = y.iter().zip(theta0).map(|(yi, ti)| yi / lambda - ti).collect();
        let alpha = dot(&v1, &v2) / v1_sq;
        let v2_perp = v2.iter().zip(&v1).map(|(a, b)| a - alpha * b).collect();
        Ok(Self {
            v1,
            v2,
            v2_perp,
            lambda0,
            lambda,
        })
    }

    /// `⟨v1, v2⟩ / ‖v1‖²`
    pub fn projection_coef(&self) -> f64 {
        dot(&self.v1, &self.v2) / norm2_sq(&self.v1)
    }
}

/// `v1(λ0)`: `y/λ0 − θ0` below `λ_max`, `sign(x*ᵀy)·x*` at `λ_max`.
pub fn compute_v1(d: &Dataset, theta0: &DualPoint, lambda0: f64) -> Result<Vec<f64>> {
    let (lmax, star) = lambda_max(d)?;
    check_lambda0(lambda0, lmax)?;
    Ok(lasso_v1(d, &theta0.theta, lambda0, lmax, star))
}

fn lasso_v1(d: &Dataset, theta0: &[f64], lambda0: f64, lmax: f64, star: usize) -> Vec<f64> {
    if at_lambda_max(lambda0, lmax) {
        let sign = d.col_dot(star, d.y()).signum();
        linalg::scaled(d.col(star), sign)
    } else {
        d.y().iter().zip(theta0).map(|(y, t)| y / lambda0 - t).collect()
    }
}

fn check_lambda0(lambda0: f64, lmax: f64) -> Result<()> {
    if !(lambda0 > 0.0 && lambda0 <= lmax * (1.0 + LAMBDA_MAX_REL_TOL)) {
        return Err(Error::InvalidArgument(format!(
            "lambda0 = {lambda0} must lie in (0, lambda_max = {lmax}]"
        )));
    }
    Ok(())
}

fn check_pair(lambda0: f64, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= lambda0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < lambda <= lambda0, got lambda={lambda}, lambda0={lambda0}"
        )));
    }
    Ok(())
}

pub fn compute_v_geometry(d: &Dataset, theta0: &DualPoint, lambda0: f64, lambda: f64) -> Result<VGeometry> {
    check_pair(lambda0, lambda)?;
    let v1 = compute_v1(d, theta0, lambda0)?;
    VGeometry::from_v1(d.y(), &theta0.theta, v1, lambda0, lambda)
}

/// `v̄1(λ0)`: `y/λ0 − θ0` below `λ̄_max`, `X*X*ᵀy` at `λ̄_max`.
pub fn compute_group_v1(d: &Dataset, g: &GroupLayout, theta0: &DualPoint, lambda0: f64) -> Result<Vec<f64>> {
    let (lmax, star) = group_lambda_max(d, g)?;
    check_lambda0(lambda0, lmax)?;
    Ok(group_v1(d, g, &theta0.theta, lambda0, lmax, star))
}

fn group_v1(d: &Dataset, g: &GroupLayout, theta0: &[f64], lambda0: f64, lmax: f64, star: usize) -> Vec<f64> {
    if at_lambda_max(lambda0, lmax) {
        let mut v = vec![0.0; d.n_samples()];
        for j in g.range(star) {
            linalg::axpy(d.col_dot(j, d.y()), d.col(j), &mut v);
        }
        v
    } else {
        d.y().iter().zip(theta0).map(|(y, t)| y / lambda0 - t).collect()
    }
}

pub fn compute_group_v_geometry(
    d: &Dataset,
    g: &GroupLayout,
    theta0: &DualPoint,
    lambda0: f64,
    lambda: f64,
) -> Result<VGeometry> {
    check_pair(lambda0, lambda)?;
    let v1 = compute_group_v1(d, g, theta0, lambda0)?;
    VGeometry::from_v1(d.y(), &theta0.theta, v1, lambda0, lambda)
}

/// A ball whose center is `a·θ0 + b·y + e·v1`. Keeping the coefficients lets
/// the path drivers get `Xᵀc` from cached correlations instead of a fresh
/// pass over `X`.
#[derive(Debug, Clone)]
struct BallPlan {
    radius: f64,
    theta_coef: f64,
    y_coef: f64,
    v1_coef: f64,
}

impl BallPlan {
    fn center_corr(&self, xt_theta0: &[f64], xty: &[f64], xt_v1: Option<&[f64]>) -> Vec<f64> {
        let mut out: Vec<f64> = xt_theta0
            .iter()
            .zip(xty)
            .map(|(t, yi)| self.theta_coef * t + self.y_coef * yi)
            .collect();
        if self.v1_coef != 0.0 {
            linalg::axpy(self.v1_coef, xt_v1.expect("v1 correlations needed"), &mut out);
        }
        out
    }
}

/// Radius and center coefficients for `method`. `geometry` is required for
/// IMP1, EDPP and GROUP_EDPP.
fn plan_ball(
    method: BallMethod,
    y_norm: f64,
    theta0: &[f64],
    y: &[f64],
    geometry: Option<&VGeometry>,
    lambda0: f64,
    lambda: f64,
) -> BallPlan {
    let delta = (1.0 / lambda - 1.0 / lambda0).abs();
    match method {
        BallMethod::Dpp => BallPlan {
            radius: delta * y_norm,
            theta_coef: 1.0,
            y_coef: 0.0,
            v1_coef: 0.0,
        },
        BallMethod::Imp1 => BallPlan {
            radius: norm2(&geometry.expect("geometry").v2_perp),
            theta_coef: 1.0,
            y_coef: 0.0,
            v1_coef: 0.0,
        },
        BallMethod::Imp2 => BallPlan {
            radius: 0.5 * delta * y_norm,
            theta_coef: 1.0,
            y_coef: 0.5 * (1.0 / lambda - 1.0 / lambda0),
            v1_coef: 0.0,
        },
        BallMethod::Edpp | BallMethod::GroupEdpp => {
            let geo = geometry.expect("geometry");
            // θ0 + ½(y/λ − θ0 − α·v1)
            BallPlan {
                radius: 0.5 * norm2(&geo.v2_perp),
                theta_coef: 0.5,
                y_coef: 0.5 / lambda,
                v1_coef: -0.5 * geo.projection_coef(),
            }
        }
        BallMethod::Safe => BallPlan {
            radius: linalg::norm2(
                &y.iter()
                    .zip(theta0)
                    .map(|(yi, t)| yi / lambda - t)
                    .collect::<Vec<_>>(),
            ),
            theta_coef: 0.0,
            y_coef: 1.0 / lambda,
            v1_coef: 0.0,
        },
    }
}

/// Ball center written exactly as the estimate defines it, so that at
/// `λ = λ0` it reproduces `θ0` bit for bit.
fn literal_center(
    method: BallMethod,
    theta0: &[f64],
    y: &[f64],
    geometry: Option<&VGeometry>,
    lambda0: f64,
    lambda: f64,
) -> Vec<f64> {
    match method {
        BallMethod::Dpp | BallMethod::Imp1 => theta0.to_vec(),
        BallMethod::Imp2 => {
            let h = 0.5 * (1.0 / lambda - 1.0 / lambda0);
            theta0.iter().zip(y).map(|(t, yi)| t + h * yi).collect()
        }
        BallMethod::Edpp | BallMethod::GroupEdpp => {
            let geo = geometry.expect("geometry");
            theta0.iter().zip(&geo.v2_perp).map(|(t, v)| t + 0.5 * v).collect()
        }
        BallMethod::Safe => y.iter().map(|v| v / lambda).collect(),
    }
}

fn needs_geometry(method: BallMethod) -> bool {
    matches!(method, BallMethod::Imp1 | BallMethod::Edpp | BallMethod::GroupEdpp)
}

/// Ball containing `θ*(λ)` given the dual optimum `theta0` at `lambda0`.
pub fn estimate_dual_ball(
    method: BallMethod,
    d: &Dataset,
    theta0: &DualPoint,
    lambda0: f64,
    lambda: f64,
) -> Result<BallEstimate> {
    if method == BallMethod::GroupEdpp {
        return Err(Error::InvalidArgument(
            "group EDPP needs a group layout; use estimate_group_dual_ball".into(),
        ));
    }
    check_pair(lambda0, lambda)?;
    let geometry = if needs_geometry(method) {
        Some(compute_v_geometry(d, theta0, lambda0, lambda)?)
    } else {
        None
    };
    let plan = plan_ball(method, d.y_norm(), &theta0.theta, d.y(), geometry.as_ref(), lambda0, lambda);
    let center = literal_center(method, &theta0.theta, d.y(), geometry.as_ref(), lambda0, lambda);
    BallEstimate::new(center, plan.radius, method, lambda0, lambda)
}

/// Group EDPP ball `B(θ0 + ½v̄2⊥, ½‖v̄2⊥‖)`.
pub fn estimate_group_dual_ball(
    d: &Dataset,
    g: &GroupLayout,
    theta0: &DualPoint,
    lambda0: f64,
    lambda: f64,
) -> Result<BallEstimate> {
    let geometry = compute_group_v_geometry(d, g, theta0, lambda0, lambda)?;
    let plan = plan_ball(
        BallMethod::GroupEdpp,
        d.y_norm(),
        &theta0.theta,
        d.y(),
        Some(&geometry),
        lambda0,
        lambda,
    );
    let center = literal_center(BallMethod::GroupEdpp, &theta0.theta, d.y(), Some(&geometry), lambda0, lambda);
    BallEstimate::new(center, plan.radius, BallMethod::GroupEdpp, lambda0, lambda)
}

fn method_rule(method: BallMethod) -> Rule {
    match method {
        BallMethod::Dpp => Rule::Dpp,
        BallMethod::Imp1 => Rule::Imp1,
        BallMethod::Imp2 => Rule::Imp2,
        BallMethod::Edpp => Rule::Edpp,
        BallMethod::Safe => Rule::Safe,
        BallMethod::GroupEdpp => Rule::GroupEdpp,
    }
}

#[inline]
fn feature_test(corr: f64, radius: f64, col_norm: f64, margin: f64) -> bool {
    corr.abs() < 1.0 - (radius + margin) * col_norm
}

/// Discards feature `i` when `|x_iᵀc| < 1 − ρ‖x_i‖`.
pub fn screen_with_ball(d: &Dataset, ball: &BallEstimate) -> ScreenMask {
    screen_with_ball_margin(d, ball, 0.0)
}

/// As [`screen_with_ball`] with the threshold further lowered by `margin·‖x_i‖`.
pub fn screen_with_ball_margin(d: &Dataset, ball: &BallEstimate, margin: f64) -> ScreenMask {
    let discard = (0..d.n_features())
        .map(|j| feature_test(d.col_dot(j, ball.center()), ball.radius(), d.col_norms()[j], margin))
        .collect();
    ScreenMask {
        discard,
        rule: method_rule(ball.method()),
        lambda: ball.lambda(),
        lambda0: ball.lambda0(),
    }
}

fn lasso_mask_from_corr(corr: &[f64], col_norms: &[f64], radius: f64, margin: f64) -> Vec<bool> {
    corr.iter()
        .zip(col_norms)
        .map(|(c, n)| feature_test(*c, radius, *n, margin))
        .collect()
}

/// Discards group `g` when `‖X_gᵀc‖ < √n_g − ρ‖X_g‖₂`.
pub fn screen_groups_with_ball(d: &Dataset, g: &GroupLayout, spectral: &[f64], ball: &BallEstimate) -> ScreenMask {
    let corr = d.xt_mul(ball.center());
    ScreenMask {
        discard: group_mask_from_corr(g, spectral, &corr, ball.radius(), 0.0),
        rule: Rule::GroupEdpp,
        lambda: ball.lambda(),
        lambda0: ball.lambda0(),
    }
}

fn group_mask_from_corr(g: &GroupLayout, spectral: &[f64], corr: &[f64], radius: f64, margin: f64) -> Vec<bool> {
    (0..g.n_groups())
        .map(|k| norm2(&corr[g.range(k)]) < g.weight(k) - (radius + margin) * spectral[k])
        .collect()
}

/// Basic SAFE: discard `i` if `|x_iᵀy| < λ − ‖x_i‖‖y‖(λ_max − λ)/λ_max`.
pub fn screen_safe_basic(d: &Dataset, lambda: f64) -> Result<ScreenMask> {
    let xty = d.xt_mul(d.y());
    let (lmax, _) = argmax_abs(&xty)?;
    if !(lambda > 0.0 && lambda <= lmax) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must lie in (0, {lmax}]")));
    }
    let shrink = d.y_norm() * (lmax - lambda) / lmax;
    let discard = xty
        .iter()
        .zip(d.col_norms())
        .map(|(c, n)| c.abs() < lambda - n * shrink)
        .collect();
    Ok(ScreenMask {
        discard,
        rule: Rule::Safe,
        lambda,
        lambda0: lmax,
    })
}

/// Sequential strong rule: discard `i` if `|x_iᵀ(y − Xβ_prev)| < 2λ − λ_prev`.
/// Heuristic; pair it with [`kkt_violations`].
pub fn screen_strong_sequential(d: &Dataset, beta_prev: &[f64], lambda_prev: f64, lambda: f64) -> ScreenMask {
    let corr = d.xt_mul(&d.residual(beta_prev));
    ScreenMask {
        discard: strong_mask_from_corr(&corr, lambda_prev, lambda),
        rule: Rule::Strong,
        lambda,
        lambda0: lambda_prev,
    }
}

fn strong_mask_from_corr(corr: &[f64], lambda_prev: f64, lambda: f64) -> Vec<bool> {
    let threshold = 2.0 * lambda - lambda_prev;
    corr.iter().map(|c| c.abs() < threshold).collect()
}

/// Discarded indices whose KKT condition `|x_iᵀ(y − Xβ)|/λ ≤ 1 + KKT_TOL` fails.
pub fn kkt_violations(d: &Dataset, beta: &[f64], lambda: f64, mask: &ScreenMask) -> Vec<usize> {
    let r = d.residual(beta);
    violations_from_corr(&mask.discard, |j| d.col_dot(j, &r), lambda)
}

fn violations_from_corr(discard: &[bool], corr: impl Fn(usize) -> f64, lambda: f64) -> Vec<usize> {
    discard
        .iter()
        .enumerate()
        .filter(|(j, d)| **d && corr(*j).abs() / lambda > 1.0 + KKT_TOL)
        .map(|(j, _)| j)
        .collect()
}

/// Basic rules screen every λ against the closed-form dual point at `λ_max`:
/// `λ0 = λ_max`, `θ0 = y/λ_max`.
pub fn basic_screen(rule: Rule, d: &Dataset, lambda: f64) -> Result<ScreenMask> {
    let (lmax, _) = lambda_max(d)?;
    if !(lambda > 0.0 && lambda <= lmax) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must lie in (0, {lmax}]")));
    }
    match rule {
        Rule::Safe => screen_safe_basic(d, lambda),
        Rule::Strong => {
            let corr = d.xt_mul(d.y());
            Ok(ScreenMask {
                discard: strong_mask_from_corr(&corr, lmax, lambda),
                rule,
                lambda,
                lambda0: lmax,
            })
        }
        Rule::GroupEdpp => Err(Error::InvalidArgument(
            "group EDPP needs a group layout".into(),
        )),
        _ => {
            let theta0 = DualPoint {
                theta: d.y().iter().map(|v| v / lmax).collect(),
                lambda: lmax,
                feasibility_slack: 0.0,
            };
            let method = rule.ball_method().expect("safe ball rule");
            let ball = estimate_dual_ball(method, d, &theta0, lmax, lambda)?;
            let mut mask = screen_with_ball(d, &ball);
            mask.rule = rule;
            Ok(mask)
        }
    }
}

/// Spectral norm `‖X_g‖₂` of every group block, by power iteration on
/// `X_gᵀX_g` (30 steps, relative tolerance 1e-10). Singleton groups use the
/// column norm; a block whose iteration has not settled falls back to the
/// Frobenius norm, which is an upper bound and so keeps the test safe.
pub fn group_spectral_norms(d: &Dataset, g: &GroupLayout) -> Vec<f64> {
    (0..g.n_groups())
        .map(|k| {
            let range = g.range(k);
            if range.len() == 1 {
                return d.col_norms()[range.start];
            }
            let cols: Vec<usize> = range.collect();
            let (eig, converged) = solver::power_iteration_gram_checked(d, &cols, 30, 1e-10);
            if converged {
                eig.max(0.0).sqrt()
            } else {
                cols.iter().map(|&j| d.col_norms()[j].powi(2)).sum::<f64>().sqrt()
            }
        })
        .collect()
}

/// Per-step bookkeeping from the path drivers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub screen_seconds: f64,
    pub solver_seconds: f64,
    /// Strong rule only: indices un-discarded by the KKT re-check.
    pub kkt_violations: Vec<usize>,
    /// Set when the solver hit `max_iters` and the path continued from its best iterate.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenedPath {
    pub solutions: Vec<PrimalSolution>,
    pub masks: Vec<ScreenMask>,
    pub steps: Vec<StepStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathOptions {
    /// Lowers every threshold by `margin·‖x_i‖` (or `margin·‖X_g‖₂`).
    pub safety_margin: f64,
    /// Keep going from the best iterate when a solve exceeds `max_iters`.
    pub continue_on_failure: bool,
}

/// Sequential screening along `grid`: `θ*(λ_k)` recovered from the solution
/// at `λ_k` screens `λ_{k+1}`; the path is seeded with `β*(λ_max) = 0`.
pub fn sequential_screen(rule: Rule, d: &Dataset, grid: &LambdaGrid, cfg: &SolverConfig) -> Result<ScreenedPath> {
    sequential_screen_with(rule, d, grid, cfg, &PathOptions::default())
}

pub fn sequential_screen_with(
    rule: Rule,
    d: &Dataset,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
    opts: &PathOptions,
) -> Result<ScreenedPath> {
    if rule == Rule::GroupEdpp {
        return Err(Error::InvalidArgument(
            "group EDPP needs a group layout; use group_sequential_screen".into(),
        ));
    }
    let mut runner = PathRunner::new(d, None, rule, cfg, opts)?;
    runner.run(grid)
}

/// Group EDPP along `grid`, anchored at `λ̄_max`.
pub fn group_sequential_screen(d: &Dataset, g: &GroupLayout, grid: &LambdaGrid, cfg: &SolverConfig) -> Result<ScreenedPath> {
    group_sequential_screen_with(d, g, grid, cfg, &PathOptions::default())
}

pub fn group_sequential_screen_with(
    d: &Dataset,
    g: &GroupLayout,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
    opts: &PathOptions,
) -> Result<ScreenedPath> {
    let mut runner = PathRunner::new(d, Some(g), Rule::GroupEdpp, cfg, opts)?;
    runner.run(grid)
}

/// Shared machinery for the sequential drivers. Caches `Xᵀy` and `Xᵀv1(λ_max)`
/// so each step costs one pass over `X` (the correlations of the new residual)
/// plus the reduced solve.
struct PathRunner<'a> {
    d: &'a Dataset,
    group: Option<(&'a GroupLayout, Vec<f64>)>,
    rule: Rule,
    cfg: SolverConfig,
    opts: PathOptions,
    lambda_max: f64,
    xty: Vec<f64>,
    v1_max: Vec<f64>,
    xt_v1_max: Vec<f64>,
}

/// Dual information at the previous grid point.
struct Anchor {
    lambda0: f64,
    beta: Vec<f64>,
    theta0: Vec<f64>,
    xt_theta0: Vec<f64>,
    /// `Xᵀ(y − Xβ)` at the anchor; used by the strong rule.
    xtr: Vec<f64>,
}

impl<'a> PathRunner<'a> {
    fn new(d: &'a Dataset, g: Option<&'a GroupLayout>, rule: Rule, cfg: &SolverConfig, opts: &PathOptions) -> Result<Self> {
        cfg.validate()?;
        let xty = d.xt_mul(d.y());
        let (lambda_max, v1_max, group) = match g {
            None => {
                let (lmax, star) = argmax_abs(&xty)?;
                let v1 = linalg::scaled(d.col(star), xty[star].signum());
                (lmax, v1, None)
            }
            Some(g) => {
                g.check_features(d.n_features())?;
                let (lmax, star) = group_argmax(g, &xty)?;
                let mut v1 = vec![0.0; d.n_samples()];
                for j in g.range(star) {
                    linalg::axpy(xty[j], d.col(j), &mut v1);
                }
                (lmax, v1, Some((g, group_spectral_norms(d, g))))
            }
        };
        let xt_v1_max = d.xt_mul(&v1_max);
        Ok(Self {
            d,
            group,
            rule,
            cfg: *cfg,
            opts: *opts,
            lambda_max,
            xty,
            v1_max,
            xt_v1_max,
        })
    }

    fn n_units(&self) -> usize {
        match &self.group {
            Some((g, _)) => g.n_groups(),
            None => self.d.n_features(),
        }
    }

    fn seed_anchor(&self) -> Anchor {
        let lmax = self.lambda_max;
        Anchor {
            lambda0: lmax,
            beta: vec![0.0; self.d.n_features()],
            theta0: self.d.y().iter().map(|v| v / lmax).collect(),
            xt_theta0: self.xty.iter().map(|v| v / lmax).collect(),
            xtr: self.xty.clone(),
        }
    }

    fn run(&mut self, grid: &LambdaGrid) -> Result<ScreenedPath> {
        let p = self.d.n_features();
        let units = self.n_units();
        let mut out = ScreenedPath {
            solutions: Vec::with_capacity(grid.len()),
            masks: Vec::with_capacity(grid.len()),
            steps: Vec::with_capacity(grid.len()),
        };
        let mut anchor = self.seed_anchor();
        for (k, &lambda) in grid.values().iter().enumerate() {
            if lambda >= self.lambda_max * (1.0 - LAMBDA_MAX_REL_TOL) {
                // β = 0 is optimal; the empty workload is still timed
                let t0 = Instant::now();
                out.masks.push(ScreenMask::discard_all(units, self.rule, lambda, self.lambda_max));
                let t1 = Instant::now();
                out.solutions.push(PrimalSolution::zero(p, lambda));
                out.steps.push(StepStats {
                    screen_seconds: (t1 - t0).as_secs_f64(),
                    solver_seconds: t1.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
                    ..StepStats::default()
                });
                continue;
            }
            let (solution, mask, stats) = self
                .step(&anchor, lambda)
                .map_err(|e| Error::PathStep {
                    index: k,
                    lambda,
                    source: Box::new(e),
                })?;
            let t0 = Instant::now();
            anchor = self.make_anchor(&solution, lambda);
            let recover_seconds = t0.elapsed().as_secs_f64();
            out.solutions.push(solution);
            out.masks.push(mask);
            let mut stats = stats;
            // recovering the dual point is the first half of screening the next λ
            stats.screen_seconds += recover_seconds;
            out.steps.push(stats);
        }
        Ok(out)
    }

    /// Recovers `θ*(λ)` from the solution, scaled to feasibility, together
    /// with the correlations `Xᵀθ`.
    fn make_anchor(&self, solution: &PrimalSolution, lambda: f64) -> Anchor {
        let r = self.d.residual(&solution.beta);
        let xtr = self.d.xt_mul(&r);
        let s = match &self.group {
            None => linalg::max_abs(&xtr) / lambda,
            Some((g, _)) => group_scores(g, &xtr).into_iter().fold(0.0, f64::max) / lambda,
        };
        let scale = 1.0 / (lambda * s.max(1.0));
        Anchor {
            lambda0: lambda,
            beta: solution.beta.clone(),
            theta0: linalg::scaled(&r, scale),
            xt_theta0: linalg::scaled(&xtr, scale),
            xtr,
        }
    }

    fn solve(&self, lambda: f64, kept: &[usize], warm: &[f64], stats: &mut StepStats) -> Result<PrimalSolution> {
        let t0 = Instant::now();
        let res = match &self.group {
            None => solver::solve_lasso_subset(self.d, lambda, kept, Some(warm), &self.cfg),
            Some((g, _)) => solver::solve_group_lasso_subset(self.d, g, lambda, kept, Some(warm), &self.cfg),
        };
        stats.solver_seconds += t0.elapsed().as_secs_f64();
        match res {
            Err(Error::MaxItersExceeded { best, gap, .. }) if self.opts.continue_on_failure => {
                stats.failure = Some(format!("max_iters reached with gap {gap:e}"));
                Ok(*best)
            }
            other => other,
        }
    }

    fn step(&self, anchor: &Anchor, lambda: f64) -> Result<(PrimalSolution, ScreenMask, StepStats)> {
        let mut stats = StepStats::default();
        if self.rule == Rule::Strong {
            return self.strong_step(anchor, lambda, stats);
        }
        let t0 = Instant::now();
        let method = self.rule.ball_method().expect("safe rule");
        let at_max = at_lambda_max(anchor.lambda0, self.lambda_max);
        let geometry = if needs_geometry(method) {
            let v1 = if at_max {
                self.v1_max.clone()
            } else {
                self.d
                    .y()
                    .iter()
                    .zip(&anchor.theta0)
                    .map(|(y, t)| y / anchor.lambda0 - t)
                    .collect()
            };
            Some(VGeometry::from_v1(self.d.y(), &anchor.theta0, v1, anchor.lambda0, lambda)?)
        } else {
            None
        };
        let plan = plan_ball(method, self.d.y_norm(), &anchor.theta0, self.d.y(), geometry.as_ref(), anchor.lambda0, lambda);
        let xt_v1: Option<Vec<f64>> = if plan.v1_coef == 0.0 {
            None
        } else if at_max {
            Some(self.xt_v1_max.clone())
        } else {
            Some(
                self.xty
                    .iter()
                    .zip(&anchor.xt_theta0)
                    .map(|(a, b)| a / anchor.lambda0 - b)
                    .collect(),
            )
        };
        let corr = plan.center_corr(&anchor.xt_theta0, &self.xty, xt_v1.as_deref());
        let discard = match &self.group {
            None => lasso_mask_from_corr(&corr, self.d.col_norms(), plan.radius, self.opts.safety_margin),
            Some((g, spectral)) => group_mask_from_corr(g, spectral, &corr, plan.radius, self.opts.safety_margin),
        };
        let mask = ScreenMask {
            discard,
            rule: self.rule,
            lambda,
            lambda0: anchor.lambda0,
        };
        let kept = mask.kept();
        stats.screen_seconds = t0.elapsed().as_secs_f64();
        let solution = self.solve(lambda, &kept, &anchor.beta, &mut stats)?;
        Ok((solution, mask, stats))
    }

    fn strong_step(&self, anchor: &Anchor, lambda: f64, mut stats: StepStats) -> Result<(PrimalSolution, ScreenMask, StepStats)> {
        let t0 = Instant::now();
        let mut discard = match &self.group {
            None => strong_mask_from_corr(&anchor.xtr, anchor.lambda0, lambda),
            Some((g, _)) => {
                let threshold = 2.0 * lambda - anchor.lambda0;
                (0..g.n_groups())
                    .map(|k| norm2(&anchor.xtr[g.range(k)]) / g.weight(k) < threshold)
                    .collect()
            }
        };
        stats.screen_seconds += t0.elapsed().as_secs_f64();
        let mut warm = anchor.beta.clone();
        loop {
            let kept: Vec<usize> = discard
                .iter()
                .enumerate()
                .filter(|(_, d)| !**d)
                .map(|(i, _)| i)
                .collect();
            let solution = self.solve(lambda, &kept, &warm, &mut stats)?;
            let t1 = Instant::now();
            let r = self.d.residual(&solution.beta);
            let violators = match &self.group {
                None => violations_from_corr(&discard, |j| self.d.col_dot(j, &r), lambda),
                Some((g, _)) => violations_from_corr(&discard, |k| solver::group_corr_norm(self.d, g, k, &r) / g.weight(k), lambda),
            };
            stats.screen_seconds += t1.elapsed().as_secs_f64();
            if violators.is_empty() {
                let mask = ScreenMask {
                    discard,
                    rule: Rule::Strong,
                    lambda,
                    lambda0: anchor.lambda0,
                };
                return Ok((solution, mask, stats));
            }
            for &j in &violators {
                discard[j] = false;
            }
            stats.kkt_violations.extend(violators);
            warm = solution.beta;
        }
    }
}

/// Sequential strong rule with KKT repair along a grid for Lasso.
pub fn strong_rule_path(d: &Dataset, grid: &LambdaGrid, cfg: &SolverConfig) -> Result<ScreenedPath> {
    sequential_screen(Rule::Strong, d, grid, cfg)
}

/// Sequential strong rule for group Lasso (`‖X_gᵀr‖/√n_g < 2λ − λ_prev`), with KKT repair.
pub fn group_strong_rule_path(d: &Dataset, g: &GroupLayout, grid: &LambdaGrid, cfg: &SolverConfig) -> Result<ScreenedPath> {
    let mut runner = PathRunner::new(d, Some(g), Rule::Strong, cfg, &PathOptions::default())?;
    runner.run(grid)
}

/// Unscreened path with warm starts (the reference every rule is compared to).
pub fn baseline_path(d: &Dataset, g: Option<&GroupLayout>, grid: &LambdaGrid, cfg: &SolverConfig) -> Result<Vec<PrimalSolution>> {
    let mut out: Vec<PrimalSolution> = Vec::with_capacity(grid.len());
    for (k, &lambda) in grid.values().iter().enumerate() {
        let warm = out.last().map(|s| s.beta.as_slice());
        let res = match g {
            None => solver::solve_lasso(d, lambda, warm, cfg),
            Some(g) => solver::solve_group_lasso(d, g, lambda, warm, cfg),
        };
        out.push(res.map_err(|e| Error::PathStep {
            index: k,
            lambda,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DesignMatrix;

    fn identity_problem() -> Dataset {
        Dataset::new(DesignMatrix::identity(2), vec![3.0, 4.0]).unwrap()
    }

    fn dual(theta: Vec<f64>, lambda: f64) -> DualPoint {
        DualPoint {
            theta,
            lambda,
            feasibility_slack: 0.0,
        }
    }

    #[test]
    fn lambda_max_identity() {
        assert_eq!(lambda_max(&identity_problem()).unwrap(), (4.0, 1));
    }

    #[test]
    fn degenerate_response() {
        let d = Dataset::from_rows(&[vec![1.0], vec![0.0]], vec![0.0, 2.0]).unwrap();
        assert!(matches!(lambda_max(&d), Err(Error::DegenerateResponse)));
        let g = GroupLayout::singletons(1);
        assert!(matches!(group_lambda_max(&d, &g), Err(Error::DegenerateResponse)));
    }

    #[test]
    fn group_lambda_max_examples() {
        let d = identity_problem();
        assert_eq!(group_lambda_max(&d, &GroupLayout::singletons(2)).unwrap(), (4.0, 1));
        let (v, k) = group_lambda_max(&d, &GroupLayout::new(vec![2]).unwrap()).unwrap();
        assert!((v - 5.0 / 2.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(k, 0);
    }

    #[test]
    fn v1_branches() {
        let d = identity_problem();
        let at_max = compute_v1(&d, &dual(vec![0.75, 1.0], 4.0), 4.0).unwrap();
        assert_eq!(at_max, vec![0.0, 1.0]);
        // θ*(2) = P_box((1.5, 2)) = (1, 1)
        let below = compute_v1(&d, &dual(vec![1.0, 1.0], 2.0), 2.0).unwrap();
        assert_eq!(below, vec![0.5, 1.0]);
        assert!(compute_v1(&d, &dual(vec![0.0, 0.0], 5.0), 5.0).is_err());
    }

    #[test]
    fn gram_schmidt_cases() {
        let g = VGeometry::from_v1(&[1.0, 1.0], &[0.0, 0.0], vec![1.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(g.v2_perp, vec![0.0, 1.0]);
        let par = VGeometry::from_v1(&[2.0, 4.0], &[0.0, 0.0], vec![1.0, 2.0], 1.0, 1.0).unwrap();
        assert!(norm2(&par.v2_perp) < 1e-15);
        assert!(matches!(
            VGeometry::from_v1(&[1.0], &[0.0], vec![0.0], 1.0, 1.0),
            Err(Error::DegenerateV1)
        ));
    }

    #[test]
    fn identity_geometry_at_half() {
        let d = identity_problem();
        let geo = compute_v_geometry(&d, &dual(vec![0.75, 1.0], 4.0), 4.0, 2.0).unwrap();
        assert_eq!(geo.v1, vec![0.0, 1.0]);
        assert_eq!(geo.v2, vec![0.75, 1.0]);
        assert_eq!(geo.v2_perp, vec![0.75, 0.0]);
        assert_eq!(dot(&geo.v1, &geo.v2), 1.0);
    }

    #[test]
    fn four_balls_on_identity() {
        let d = identity_problem();
        let t0 = dual(vec![0.75, 1.0], 4.0);
        let dpp = estimate_dual_ball(BallMethod::Dpp, &d, &t0, 4.0, 2.0).unwrap();
        assert!((dpp.radius() - 1.25).abs() < 1e-15);
        assert_eq!(dpp.center(), &[0.75, 1.0]);
        let imp1 = estimate_dual_ball(BallMethod::Imp1, &d, &t0, 4.0, 2.0).unwrap();
        assert!((imp1.radius() - 0.75).abs() < 1e-15);
        let imp2 = estimate_dual_ball(BallMethod::Imp2, &d, &t0, 4.0, 2.0).unwrap();
        assert!((imp2.radius() - 0.625).abs() < 1e-15);
        assert!((imp2.center()[0] - 1.125).abs() < 1e-15 && (imp2.center()[1] - 1.5).abs() < 1e-15);
        let edpp = estimate_dual_ball(BallMethod::Edpp, &d, &t0, 4.0, 2.0).unwrap();
        assert!((edpp.radius() - 0.375).abs() < 1e-15);
        assert!((edpp.center()[0] - 1.125).abs() < 1e-15 && (edpp.center()[1] - 1.0).abs() < 1e-15);
        // θ*(2) = (1, 1) lies in every ball
        for b in [&dpp, &imp1, &imp2, &edpp] {
            assert!(b.contains(&[1.0, 1.0], 1e-12), "{:?}", b.method());
        }
    }

    #[test]
    fn zero_radius_at_lambda0() {
        let d = identity_problem();
        let t0 = dual(vec![0.75, 1.0], 4.0);
        for m in [BallMethod::Dpp, BallMethod::Imp1, BallMethod::Imp2, BallMethod::Edpp] {
            let b = estimate_dual_ball(m, &d, &t0, 4.0, 4.0).unwrap();
            assert_eq!(b.radius(), 0.0);
            assert_eq!(b.center(), &[0.75, 1.0]);
        }
        let t2 = dual(vec![1.0, 1.0], 2.0);
        let b = estimate_dual_ball(BallMethod::Edpp, &d, &t2, 2.0, 2.0).unwrap();
        assert!(b.radius() < 1e-15);
    }

    #[test]
    fn edpp_screen_near_lambda_max() {
        let d = identity_problem();
        let t0 = dual(vec![0.75, 1.0], 4.0);
        let ball = estimate_dual_ball(BallMethod::Edpp, &d, &t0, 4.0, 3.9).unwrap();
        assert!((ball.radius() - 0.009615384615).abs() < 1e-9);
        assert!((ball.center()[0] - 0.759615384615).abs() < 1e-9);
        let mask = screen_with_ball(&d, &ball);
        assert_eq!(mask.discard, vec![true, false]);
        assert_eq!(mask.rule, Rule::Edpp);
    }

    #[test]
    fn huge_radius_discards_nothing() {
        let d = identity_problem();
        let ball = BallEstimate::new(vec![0.0, 0.0], 1.0, BallMethod::Dpp, 4.0, 1.0).unwrap();
        assert_eq!(screen_with_ball(&d, &ball).n_discarded(), 0);
    }

    #[test]
    fn zero_column_always_discarded() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.0]], vec![1.0, 2.0]).unwrap();
        let ball = BallEstimate::new(vec![10.0, 10.0], 100.0, BallMethod::Dpp, 1.0, 0.5).unwrap();
        assert_eq!(screen_with_ball(&d, &ball).discard, vec![false, true]);
    }

    #[test]
    fn safe_basic_examples() {
        let d = identity_problem();
        assert_eq!(screen_safe_basic(&d, 3.9).unwrap().discard, vec![true, false]);
        assert_eq!(screen_safe_basic(&d, 4.0).unwrap().discard, vec![true, false]);
    }

    #[test]
    fn basic_dpp_example() {
        let d = identity_problem();
        let m = basic_screen(Rule::Dpp, &d, 3.9).unwrap();
        assert_eq!(m.discard, vec![true, false]);
        let top = basic_screen(Rule::Edpp, &d, 4.0).unwrap();
        assert_eq!(top.discard, vec![true, false]);
    }

    #[test]
    fn strong_rule_at_same_lambda() {
        let d = identity_problem();
        // r = y at β = 0; threshold 2λ − λ_prev = λ_prev when λ = λ_prev
        let m = screen_strong_sequential(&d, &[0.0, 0.0], 4.0, 4.0);
        assert_eq!(m.discard, vec![true, false]);
    }

    #[test]
    fn grid_of_lambda_max_is_trivial() {
        let d = identity_problem();
        let grid = LambdaGrid::new(4.0, vec![1.0]).unwrap();
        let path = sequential_screen(Rule::Edpp, &d, &grid, &SolverConfig::default()).unwrap();
        assert_eq!(path.solutions[0].beta, vec![0.0, 0.0]);
        assert_eq!(path.masks[0].n_discarded(), 2);
    }

    #[test]
    fn sequential_identity_path() {
        let d = identity_problem();
        let grid = LambdaGrid::new(4.0, vec![1.0, 0.975, 0.5, 0.25]).unwrap();
        for rule in Rule::LASSO {
            let path = sequential_screen(rule, &d, &grid, &SolverConfig::default()).unwrap();
            for (s, &lambda) in path.solutions.iter().zip(grid.values()) {
                let expect = [
                    solver::soft_threshold(3.0, lambda),
                    solver::soft_threshold(4.0, lambda),
                ];
                assert!((s.beta[0] - expect[0]).abs() < 1e-12, "{rule} {lambda}");
                assert!((s.beta[1] - expect[1]).abs() < 1e-12, "{rule} {lambda}");
            }
            assert!(!path.masks[1].discard[1]);
        }
    }
}
