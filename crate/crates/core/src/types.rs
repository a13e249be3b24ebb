//! Domain types shared by the solver, screening and benchmark modules.
//!
//! Everything here is immutable after construction; constructors check the
//! invariants and the rest are accessors.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Dense column-major matrix. Every screening test is a per-column dot
/// product, so columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_col_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} matrix",
                data.len(),
                n_rows,
                n_cols
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds from row-major nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = vec![0.0; n_rows * n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    r,
                    row.len(),
                    n_cols
                )));
            }
            for (c, v) in row.iter().enumerate() {
                data[c * n_rows + r] = *v;
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n_cols = cols.len();
        let n_rows = cols.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (c, col) in cols.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {} has {} entries, expected {}",
                    c,
                    col.len(),
                    n_rows
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            n_rows: n,
            n_cols: n,
            data,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n_rows + row]
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Contiguous column block `cols` in column-major order.
    pub fn block(&self, cols: Range<usize>) -> &[f64] {
        &self.data[cols.start * self.n_rows..cols.end * self.n_rows]
    }

    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(cols.len() * self.n_rows);
        for &c in cols {
            data.extend_from_slice(self.col(c));
        }
        DesignMatrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }
}

/// Design matrix and response with cached column norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DesignMatrix,
    y: Vec<f64>,
    col_norms: Vec<f64>,
    y_norm: f64,
}

/// Checks shapes and finiteness and caches the norms.
pub fn validate_dataset(x: DesignMatrix, y: Vec<f64>) -> Result<Dataset> {
    Dataset::new(x, y)
}

impl Dataset {
    pub fn new(x: DesignMatrix, y: Vec<f64>) -> Result<Self> {
        if x.n_rows() == 0 || x.n_cols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "design must be at least 1x1, got {}x{}",
                x.n_rows(),
                x.n_cols()
            )));
        }
        if y.len() != x.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "response has length {}, design has {} rows",
                y.len(),
                x.n_rows()
            )));
        }
        if let Some(k) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!(
                "X[{}, {}]",
                k % x.n_rows(),
                k / x.n_rows()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("y[{i}]")));
        }
        let col_norms = (0..x.n_cols()).map(|j| linalg::norm2(x.col(j))).collect();
        let y_norm = linalg::norm2(&y);
        Ok(Self {
            x,
            y,
            col_norms,
            y_norm,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        Self::new(DesignMatrix::from_rows(rows)?, y)
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.x.n_rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        self.x.col(j)
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    pub fn y_norm(&self) -> f64 {
        self.y_norm
    }

    /// Columns with zero Euclidean norm. They are allowed, and the screening
    /// tests always discard them.
    pub fn zero_norm_columns(&self) -> Vec<usize> {
        self.col_norms
            .iter()
            .enumerate()
            .filter(|(_, n)| **n == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// `x_jᵀ v`
    #[inline]
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        linalg::dot(self.x.col(j), v)
    }

    /// `Xᵀ v`
    pub fn xt_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_features()).map(|j| self.col_dot(j, v)).collect()
    }

    /// `X β`, skipping zero coefficients.
    pub fn x_mul(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_samples()];
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                linalg::axpy(*b, self.x.col(j), &mut out);
            }
        }
        out
    }

    /// `y − X β`
    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                linalg::axpy(-*b, self.x.col(j), &mut r);
            }
        }
        r
    }

    /// Copy of this dataset restricted to `cols`.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
            col_norms: cols.iter().map(|&c| self.col_norms[c]).collect(),
            y_norm: self.y_norm,
        }
    }

    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.x.clone(), y)
    }
}

/// Partition of the feature columns into contiguous groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidGroupLayout("no groups".into()));
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidGroupLayout(format!("group {g} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Builds a layout and checks that it covers exactly `p` columns.
    pub fn for_features(sizes: Vec<usize>, p: usize) -> Result<Self> {
        let layout = Self::new(sizes)?;
        layout.check_features(p)?;
        Ok(layout)
    }

    pub fn singletons(p: usize) -> Self {
        Self::new(vec![1; p]).expect("p >= 1")
    }

    pub fn check_features(&self, p: usize) -> Result<()> {
        if self.n_features() != p {
            return Err(Error::InvalidGroupLayout(format!(
                "group sizes sum to {}, dataset has {} features",
                self.n_features(),
                p
            )));
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_features(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }

    pub fn range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    /// `√n_g`, the group penalty weight.
    pub fn weight(&self, g: usize) -> f64 {
        (self.sizes[g] as f64).sqrt()
    }
}

/// Descending sequence `λ_max ≥ λ_1 > … > λ_K` expressed as ratios of `λ_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    lambda_max: f64,
    ratios: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spacing {
    Linear,
    Log,
}

impl LambdaGrid {
    pub fn new(lambda_max: f64, ratios: Vec<f64>) -> Result<Self> {
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "lambda_max must be positive, got {lambda_max}"
            )));
        }
        if ratios.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        for (k, r) in ratios.iter().enumerate() {
            if !(*r > 0.0 && *r <= 1.0) {
                return Err(Error::InvalidGrid(format!("ratio {k} = {r} not in (0, 1]")));
            }
        }
        if ratios.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGrid("ratios must be strictly descending".into()));
        }
        let values = ratios.iter().map(|r| r * lambda_max).collect();
        Ok(Self {
            lambda_max,
            ratios,
            values,
        })
    }

    /// `n_points` ratios from `hi` down to `lo`. A single point is `hi`.
    pub fn spaced(lambda_max: f64, n_points: usize, lo: f64, hi: f64, spacing: Spacing) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidGrid("n_points must be >= 1".into()));
        }
        if n_points > 1 && !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < lo < hi <= 1, got lo={lo}, hi={hi}"
            )));
        }
        let ratios = if n_points == 1 {
            vec![hi]
        } else {
            let last = (n_points - 1) as f64;
            (0..n_points)
                .map(|k| {
                    let t = k as f64 / last;
                    match spacing {
                        Spacing::Linear => hi - t * (hi - lo),
                        Spacing::Log => (hi.ln() - t * (hi.ln() - lo.ln())).exp(),
                    }
                })
                .collect()
        };
        Self::new(lambda_max, ratios)
    }

    pub fn linear(lambda_max: f64, n_points: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::spaced(lambda_max, n_points, lo, hi, Spacing::Linear)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A primal iterate together with the duality gap certified at termination.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub duality_gap: f64,
    /// Coordinate-descent sweeps or proximal-gradient steps performed.
    pub iterations: usize,
}

impl PrimalSolution {
    pub fn zero(p: usize, lambda: f64) -> Self {
        Self {
            beta: vec![0.0; p],
            lambda,
            duality_gap: 0.0,
            iterations: 0,
        }
    }

    /// Indices with `|β_i| > threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A dual-feasible point. `feasibility_slack` is `max constraint value − 1`
/// measured before the point was scaled into the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub feasibility_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BallMethod {
    Dpp,
    Imp1,
    Imp2,
    Edpp,
    /// Sphere centred at `y/λ` (SAFE / ST1 family).
    Safe,
    GroupEdpp,
}

/// `B(center, radius)`, a region known to contain `θ*(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEstimate {
    center: Vec<f64>,
    radius: f64,
    method: BallMethod,
    lambda0: f64,
    lambda: f64,
}

impl BallEstimate {
    pub fn new(center: Vec<f64>, radius: f64, method: BallMethod, lambda0: f64, lambda: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        if !(lambda > 0.0 && lambda <= lambda0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < lambda <= lambda0, got lambda={lambda}, lambda0={lambda0}"
            )));
        }
        Ok(Self {
            center,
            radius,
            method,
            lambda0,
            lambda,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn method(&self) -> BallMethod {
        self.method
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        linalg::dist2(point, &self.center) <= self.radius + slack
    }
}

/// Screening rules known to the drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    Dpp,
    Imp1,
    Imp2,
    Edpp,
    Safe,
    Strong,
    GroupEdpp,
}

impl Rule {
    pub const LASSO: [Rule; 6] = [Rule::Dpp, Rule::Imp1, Rule::Imp2, Rule::Edpp, Rule::Safe, Rule::Strong];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Dpp => "dpp",
            Rule::Imp1 => "imp1",
            Rule::Imp2 => "imp2",
            Rule::Edpp => "edpp",
            Rule::Safe => "safe",
            Rule::Strong => "strong",
            Rule::GroupEdpp => "group-edpp",
        }
    }

    /// The dual ball a safe rule screens with; `None` for the strong rule.
    pub fn ball_method(self) -> Option<BallMethod> {
        match self {
            Rule::Dpp => Some(BallMethod::Dpp),
            Rule::Imp1 => Some(BallMethod::Imp1),
            Rule::Imp2 => Some(BallMethod::Imp2),
            Rule::Edpp => Some(BallMethod::Edpp),
            Rule::Safe => Some(BallMethod::Safe),
            Rule::GroupEdpp => Some(BallMethod::GroupEdpp),
            Rule::Strong => None,
        }
    }

    pub fn is_safe(self) -> bool {
        self != Rule::Strong
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dpp" => Ok(Rule::Dpp),
            "imp1" => Ok(Rule::Imp1),
            "imp2" => Ok(Rule::Imp2),
            "edpp" => Ok(Rule::Edpp),
            "safe" => Ok(Rule::Safe),
            "strong" => Ok(Rule::Strong),
            "group-edpp" | "group_edpp" | "gedpp" => Ok(Rule::GroupEdpp),
            other => Err(Error::InvalidArgument(format!("unknown rule '{other}'"))),
        }
    }
}

/// Keep/discard decision for every feature (or group) at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenMask {
    pub discard: Vec<bool>,
    pub rule: Rule,
    pub lambda: f64,
    pub lambda0: f64,
}

impl ScreenMask {
    pub fn keep_all(len: usize, rule: Rule, lambda: f64, lambda0: f64) -> Self {
        Self {
            discard: vec![false; len],
            rule,
            lambda,
            lambda0,
        }
    }

    pub fn discard_all(len: usize, rule: Rule, lambda: f64, lambda0: f64) -> Self {
        Self {
            discard: vec![true; len],
            rule,
            lambda,
            lambda0,
        }
    }

    pub fn len(&self) -> usize {
        self.discard.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discard.is_empty()
    }

    pub fn n_discarded(&self) -> usize {
        self.discard.iter().filter(|d| **d).count()
    }

    pub fn kept(&self) -> Vec<usize> {
        self.discard
            .iter()
            .enumerate()
            .filter(|(_, d)| !**d)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn discarded(&self) -> Vec<usize> {
        self.discard
            .iter()
            .enumerate()
            .filter(|(_, d)| **d)
            .map(|(i, _)| i)
            .collect()
    }

    /// Every index discarded here is also discarded by `other`.
    pub fn is_subset_of(&self, other: &ScreenMask) -> bool {
        self.discard
            .iter()
            .zip(&other.discard)
            .all(|(a, b)| !*a || *b)
    }
}

/// One row of a path benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub rule: String,
    pub lambda: f64,
    pub lambda_over_lambda_max: f64,
    pub n_discarded: usize,
    pub n_true_zero: usize,
    pub rejection_ratio: Option<f64>,
    pub screen_seconds: f64,
    pub solver_seconds: f64,
}

impl PathRecord {
    pub fn ratio(n_discarded: usize, n_true_zero: usize) -> Option<f64> {
        (n_true_zero > 0).then(|| n_discarded as f64 / n_true_zero as f64)
    }
}

/// Totals for one rule over the whole path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub rule: String,
    pub n_discarded: usize,
    pub n_true_zero: usize,
    pub mean_rejection_ratio: Option<f64>,
    pub screen_seconds: f64,
    pub solver_seconds: f64,
    /// Baseline (no screening) total divided by `screen_seconds + solver_seconds`.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub rule: String,
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub lambda_max: f64,
    pub records: Vec<PathRecord>,
    pub summaries: Vec<RuleSummary>,
    pub baseline_seconds: f64,
    pub failures: Vec<PathFailure>,
}

impl PathResult {
    pub fn records_for<'a>(&'a self, rule: &'a str) -> impl Iterator<Item = &'a PathRecord> + 'a {
        self.records.iter().filter(move |r| r.rule == rule)
    }

    pub fn summary_for(&self, rule: &str) -> Option<&RuleSummary> {
        self.summaries.iter().find(|s| s.rule == rule)
    }
}
