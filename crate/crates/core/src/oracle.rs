//! Reference machinery for tests: Dykstra projection onto the dual feasible
//! set, closed-form orthonormal solutions, feasible-point sampling and a
//! plain proximal-gradient Lasso solver. Nothing here is used by the
//! screening path; it is deliberately simple rather than fast.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::standard_normal;
use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, norm2_sq};
use crate::solver::soft_threshold;
use crate::types::{Dataset, GroupLayout, PrimalSolution};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_CYCLES: usize = 50_000;

/// One convex constraint of the dual feasible set.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `|aᵀθ| ≤ bound`
    Slab { a: Vec<f64>, bound: f64 },
    /// `‖Aᵀθ‖ ≤ bound`, `A` given by its columns.
    Cylinder { columns: Vec<Vec<f64>>, bound: f64 },
}

impl Constraint {
    /// `value / bound`; at most 1 inside the set.
    pub fn ratio(&self, theta: &[f64]) -> f64 {
        match self {
            Constraint::Slab { a, bound } => dot(a, theta).abs() / bound,
            Constraint::Cylinder { columns, bound } => {
                columns.iter().map(|c| dot(c, theta).powi(2)).sum::<f64>().sqrt() / bound
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionProblem {
    pub point: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl ProjectionProblem {
    pub fn new(point: Vec<f64>, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            let (len_ok, bound) = match c {
                Constraint::Slab { a, bound } => (a.len() == point.len(), *bound),
                Constraint::Cylinder { columns, bound } => {
                    (columns.iter().all(|col| col.len() == point.len()), *bound)
                }
            };
            if !len_ok {
                return Err(Error::DimensionMismatch("constraint length differs from point".into()));
            }
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(Error::InvalidArgument(format!("constraint bound {bound} must be positive")));
            }
        }
        Ok(Self { point, constraints })
    }

    /// `{θ : |x_iᵀθ| ≤ 1}` for every feature.
    pub fn lasso(d: &Dataset, point: Vec<f64>) -> Result<Self> {
        let constraints = (0..d.n_features())
            .map(|j| Constraint::Slab {
                a: d.col(j).to_vec(),
                bound: 1.0,
            })
            .collect();
        Self::new(point, constraints)
    }

    /// `{θ : ‖X_gᵀθ‖ ≤ √n_g}` for every group.
    pub fn group_lasso(d: &Dataset, g: &GroupLayout, point: Vec<f64>) -> Result<Self> {
        g.check_features(d.n_features())?;
        let constraints = (0..g.n_groups())
            .map(|k| Constraint::Cylinder {
                columns: g.range(k).map(|j| d.col(j).to_vec()).collect(),
                bound: g.weight(k),
            })
            .collect();
        Self::new(point, constraints)
    }

    pub fn with_point(&self, point: Vec<f64>) -> Self {
        Self {
            point,
            constraints: self.constraints.clone(),
        }
    }

    pub fn max_ratio(&self, theta: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.ratio(theta)).fold(0.0, f64::max)
    }
}

/// Projector for one cylinder: `A = U S Vᵀ` through the eigenpairs of `AᵀA`.
struct CylinderProjector {
    columns: Vec<Vec<f64>>,
    bound: f64,
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
}

impl CylinderProjector {
    fn new(columns: &[Vec<f64>], bound: f64) -> Self {
        let k = columns.len();
        let gram = DMatrix::from_fn(k, k, |i, j| dot(&columns[i], &columns[j]));
        let eig = SymmetricEigen::new(gram);
        Self {
            columns: columns.to_vec(),
            bound,
            eigvals: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
            eigvecs: eig.eigenvectors,
        }
    }

    /// Projects `w` in place, returning the coefficients `c` with
    /// `w_old − w_new = A c`.
    fn project(&self, w: &mut [f64]) -> Vec<f64> {
        let k = self.columns.len();
        let u: Vec<f64> = self.columns.iter().map(|c| dot(c, w)).collect();
        if norm2(&u) <= self.bound {
            return vec![0.0; k];
        }
        // coordinates of Aᵀw in the eigenbasis
        let ut: Vec<f64> = (0..k)
            .map(|m| (0..k).map(|i| self.eigvecs[(i, m)] * u[i]).sum())
            .collect();
        let excess = |mu: f64| -> f64 {
            ut.iter()
                .zip(&self.eigvals)
                .map(|(t, s)| (t / (1.0 + mu * s)).powi(2))
                .sum::<f64>()
                - self.bound * self.bound
        };
        let mut lo = 0.0;
        let mut hi = norm2(&u) / self.bound;
        while excess(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        // c = μ (I + μAᵀA)⁻¹ Aᵀw
        let scaled: Vec<f64> = ut
            .iter()
            .zip(&self.eigvals)
            .map(|(t, s)| mu * t / (1.0 + mu * s))
            .collect();
        let c: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|m| self.eigvecs[(i, m)] * scaled[m]).sum())
            .collect();
        for (col, ci) in self.columns.iter().zip(&c) {
            linalg::axpy(-ci, col, w);
        }
        c
    }
}

enum Projector<'a> {
    Slab { a: &'a [f64], a_sq: f64, bound: f64 },
    Cylinder(CylinderProjector),
}

/// Euclidean projection of `p.point` onto the intersection of the
/// constraints by Dykstra's algorithm. Every correction term is a
/// combination of the constraint's own columns, so it is stored as
/// coefficients.
pub fn dykstra_project(p: &ProjectionProblem, tol: f64, max_cycles: usize) -> Result<Vec<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let projectors: Vec<Projector> = p
        .constraints
        .iter()
        .map(|c| match c {
            Constraint::Slab { a, bound } => Projector::Slab {
                a,
                a_sq: norm2_sq(a),
                bound: *bound,
            },
            Constraint::Cylinder { columns, bound } => Projector::Cylinder(CylinderProjector::new(columns, *bound)),
        })
        .collect();
    let mut corrections: Vec<Vec<f64>> = p
        .constraints
        .iter()
        .map(|c| match c {
            Constraint::Slab { .. } => vec![0.0],
            Constraint::Cylinder { columns, .. } => vec![0.0; columns.len()],
        })
        .collect();
    let mut z = p.point.clone();
    let mut increment = f64::INFINITY;
    for _ in 0..max_cycles {
        let start = z.clone();
        for (proj, q) in projectors.iter().zip(corrections.iter_mut()) {
            match proj {
                Projector::Slab { a, a_sq, bound } => {
                    if *a_sq == 0.0 {
                        continue;
                    }
                    // w = z + q·a, then project w onto the slab
                    let t = dot(a, &z) + q[0] * a_sq;
                    let excess = if t.abs() <= *bound { 0.0 } else { (t - bound.copysign(t)) / a_sq };
                    linalg::axpy(q[0] - excess, a, &mut z);
                    q[0] = excess;
                }
                Projector::Cylinder(cyl) => {
                    for (col, qi) in cyl.columns.iter().zip(q.iter()) {
                        linalg::axpy(*qi, col, &mut z);
                    }
                    *q = cyl.project(&mut z);
                }
            }
        }
        increment = linalg::dist2(&start, &z);
        if increment <= tol && p.max_ratio(&z) <= 1.0 + tol {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        cycles: max_cycles,
        increment,
    })
}

/// `P_F(y/λ)` for the Lasso dual, i.e. `θ*(λ)` without solving the primal.
pub fn lasso_dual_optimum(d: &Dataset, lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let p = ProjectionProblem::lasso(d, linalg::scaled(d.y(), 1.0 / lambda))?;
    dykstra_project(&p, tol, DEFAULT_MAX_CYCLES)
}

/// `P_F̄(y/λ)` for the group Lasso dual.
pub fn group_dual_optimum(d: &Dataset, g: &GroupLayout, lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let p = ProjectionProblem::group_lasso(d, g, linalg::scaled(d.y(), 1.0 / lambda))?;
    dykstra_project(&p, tol, DEFAULT_MAX_CYCLES)
}

/// Lasso solution for `X = I`: coordinatewise soft-thresholding of `y`.
pub fn orthonormal_design_solution(y: &[f64], lambda: f64) -> Vec<f64> {
    y.iter().map(|v| soft_threshold(*v, lambda)).collect()
}

/// `count` points of the feasible set: the origin first, then Gaussian
/// directions scaled down onto the set where needed.
pub fn sample_feasible_points(p: &ProjectionProblem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = p.point.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(vec![0.0; n]);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let s = p.max_ratio(&v);
        out.push(if s > 1.0 { linalg::scaled(&v, 1.0 / s) } else { v });
    }
    out
}

/// Duality gap evaluated directly as `P(β) − D(θ̂)`.
pub fn direct_duality_gap(d: &Dataset, beta: &[f64], lambda: f64) -> f64 {
    let r = d.residual(beta);
    let xtr = d.xt_mul(&r);
    let s = linalg::max_abs(&xtr) / lambda;
    let theta = linalg::scaled(&r, 1.0 / (lambda * s.max(1.0)));
    let primal = 0.5 * norm2_sq(&r) + lambda * linalg::l1(beta);
    let shifted: Vec<f64> = theta
        .iter()
        .zip(d.y())
        .map(|(t, y)| t - y / lambda)
        .collect();
    let dual = 0.5 * norm2_sq(d.y()) - 0.5 * lambda * lambda * norm2_sq(&shifted);
    primal - dual
}

/// Accelerated proximal gradient with backtracking and restart, stopped
/// when the direct gap drops below `gap_tol·½‖y‖²`.
pub fn proximal_gradient_lasso(d: &Dataset, lambda: f64, gap_tol: f64, max_iters: usize) -> Result<PrimalSolution> {
    let p = d.n_features();
    let target = gap_tol * 0.5 * norm2_sq(d.y());
    let mut beta = vec![0.0; p];
    let mut momentum = beta.clone();
    let mut t = 1.0_f64;
    let mut step = 1.0;
    let mut gap = direct_duality_gap(d, &beta, lambda);
    for iter in 1..=max_iters {
        let r = d.residual(&momentum);
        let grad: Vec<f64> = d.xt_mul(&r).into_iter().map(|v| -v).collect();
        let f_m = 0.5 * norm2_sq(&r);
        let next = loop {
            let cand: Vec<f64> = momentum
                .iter()
                .zip(&grad)
                .map(|(m, g)| soft_threshold(m - step * g, step * lambda))
                .collect();
            let diff = linalg::sub(&cand, &momentum);
            let f_c = 0.5 * norm2_sq(&d.residual(&cand));
            // relative slack keeps rounding noise near the optimum from halving the step forever
            let bound = f_m + dot(&grad, &diff) + norm2_sq(&diff) / (2.0 * step);
            if f_c <= bound + 1e-15 * bound.abs() {
                break cand;
            }
            step *= 0.5;
        };
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // gradient-mapping restart: momentum points uphill
        let uphill = next
            .iter()
            .zip(&momentum)
            .zip(&beta)
            .map(|((n, m), b)| (m - n) * (n - b))
            .sum::<f64>()
            > 0.0;
        if uphill {
            t = 1.0;
            momentum = next.clone();
            beta = next;
            continue;
        }
        momentum = next
            .iter()
            .zip(&beta)
            .map(|(n, b)| n + (t - 1.0) / t_next * (n - b))
            .collect();
        beta = next;
        t = t_next;
        if iter % 20 == 0 {
            gap = direct_duality_gap(d, &beta, lambda);
            if gap <= target {
                return Ok(PrimalSolution {
                    beta,
                    lambda,
                    duality_gap: gap,
                    iterations: iter,
                });
            }
        }
    }
    Err(Error::MaxItersExceeded {
        iters: max_iters,
        gap,
        target,
        best: Box::new(PrimalSolution {
            beta,
            lambda,
            duality_gap: gap,
            iterations: max_iters,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DesignMatrix;

    fn box2(point: Vec<f64>) -> ProjectionProblem {
        let d = Dataset::new(DesignMatrix::identity(2), vec![1.0, 1.0]).unwrap();
        ProjectionProblem::lasso(&d, point).unwrap()
    }

    #[test]
    fn interior_point_unchanged() {
        let z = dykstra_project(&box2(vec![0.5, -0.2]), 1e-10, 100).unwrap();
        assert_eq!(z, vec![0.5, -0.2]);
    }

    #[test]
    fn box_projection() {
        let z = dykstra_project(&box2(vec![2.0, 0.0]), 1e-10, 100).unwrap();
        assert_eq!(z, vec![1.0, 0.0]);
        let z = dykstra_project(&box2(vec![-3.0, 5.0]), 1e-10, 100).unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
    }

    #[test]
    fn dykstra_finds_nearest_not_just_feasible() {
        // two slabs meeting at an angle; the answer is the corner (1, 1)
        let p = ProjectionProblem::new(
            vec![3.0, 2.0],
            vec![
                Constraint::Slab { a: vec![1.0, 0.0], bound: 1.0 },
                Constraint::Slab { a: vec![1.0, 1.0], bound: 2.0 },
            ],
        )
        .unwrap();
        let z = dykstra_project(&p, 1e-12, 100_000).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9, "{z:?}");
    }

    #[test]
    fn cylinder_projection_orthonormal() {
        // single orthonormal group: projection onto the disc of radius √2
        let d = Dataset::new(DesignMatrix::identity(2), vec![3.0, 4.0]).unwrap();
        let g = GroupLayout::new(vec![2]).unwrap();
        let z = group_dual_optimum(&d, &g, 1.0, 1e-12).unwrap();
        let s = 2.0_f64.sqrt() / 5.0;
        assert!((z[0] - 3.0 * s).abs() < 1e-9 && (z[1] - 4.0 * s).abs() < 1e-9);
    }

    #[test]
    fn cylinder_projection_is_nearest() {
        let cols = vec![vec![1.0, 2.0, 0.0], vec![0.5, -1.0, 1.0]];
        let cyl = CylinderProjector::new(&cols, 1.0);
        let w = vec![3.0, -1.0, 2.0];
        let mut z = w.clone();
        cyl.project(&mut z);
        let c = Constraint::Cylinder { columns: cols, bound: 1.0 };
        assert!((c.ratio(&z) - 1.0).abs() < 1e-9);
        // first-order check: w − z is a combination A·c with the multiplier sign right
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
            let s = c.ratio(&v);
            let v = if s > 1.0 { linalg::scaled(&v, 1.0 / s) } else { v };
            assert!(dot(&linalg::sub(&w, &z), &linalg::sub(&v, &z)) <= 1e-9);
        }
    }

    #[test]
    fn orthonormal_solution_examples() {
        assert_eq!(orthonormal_design_solution(&[3.0, 4.0], 1.0), vec![2.0, 3.0]);
        assert_eq!(orthonormal_design_solution(&[3.0, 4.0], 4.0), vec![0.0, 0.0]);
    }

    #[test]
    fn feasible_samples() {
        let p = box2(vec![0.0, 0.0]);
        let one = sample_feasible_points(&p, 1, 9);
        assert_eq!(one, vec![vec![0.0, 0.0]]);
        let many = sample_feasible_points(&p, 100, 9);
        assert_eq!(many.len(), 100);
        assert!(many.iter().all(|v| p.max_ratio(v) <= 1.0 + 1e-12));
        assert_eq!(many, sample_feasible_points(&p, 100, 9));
    }

    #[test]
    fn proximal_gradient_identity() {
        let d = Dataset::new(DesignMatrix::identity(2), vec![3.0, 4.0]).unwrap();
        let s = proximal_gradient_lasso(&d, 1.0, 1e-14, 10_000).unwrap();
        assert!((s.beta[0] - 2.0).abs() < 1e-7 && (s.beta[1] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn no_convergence_reported() {
        let p = ProjectionProblem::new(
            vec![3.0, 2.0],
            vec![
                Constraint::Slab { a: vec![1.0, 0.0], bound: 1.0 },
                Constraint::Slab { a: vec![1.0, 1.0], bound: 2.0 },
            ],
        )
        .unwrap();
        assert!(matches!(dykstra_project(&p, 1e-14, 1), Err(Error::NoConvergence { .. })));
    }
}
