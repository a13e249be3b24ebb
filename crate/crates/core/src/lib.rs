//! Safe screening rules for the Lasso and group Lasso built on dual polytope
//! projection: the dual optimum `θ*(λ)` is the projection of `y/λ` onto the
//! dual feasible set, and each rule bounds it inside a ball derived from a
//! previously solved parameter value. Features whose correlation with every
//! point of that ball stays below one are certified inactive and removed
//! before the solver runs.
//!
//! Modules:
//! - [`types`]: datasets, group layouts, λ grids, masks and path results.
//! - [`solver`]: coordinate descent (Lasso) and FISTA (group Lasso) with
//!   duality-gap termination.
//! - [`screening`]: λ_max, the dual ball estimates (DPP, Improvement 1 and 2,
//!   EDPP, group EDPP), SAFE and strong-rule baselines, basic and sequential drivers.
//! - [`oracle`]: Dykstra projection and closed forms used to verify the above.
//! - [`data`]: CSV / binary IO, preprocessing and seeded synthetic generators.
//! - [`bench`]: path benchmarks with rejection ratios and speedups.

pub mod bench;
pub mod data;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod screening;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use solver::SolverConfig;
pub use types::{
    validate_dataset, BallEstimate, BallMethod, Dataset, DesignMatrix, DualPoint, GroupLayout, LambdaGrid,
    PathRecord, PathResult, PrimalSolution, Rule, ScreenMask, Spacing,
};
