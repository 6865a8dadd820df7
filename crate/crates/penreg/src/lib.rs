//! Penalized linear and quantile regression with sparse-group penalties and
//! adaptive weights.
//!
//! The crate covers model fitting (proximal gradient for least squares, ADMM
//! for quantile regression), the lasso / group lasso / sparse group lasso
//! penalty family with adaptive variants, pilot-estimate based weight
//! calculation, hyperparameter grids with warm starts, k-fold cross
//! validation and train/validate/test selection, and seeded synthetic data
//! generators.

pub mod dataset;
pub mod error;
pub mod grid;
mod linalg;
pub mod loss;
pub mod penalty;
pub mod solver;
pub mod tuning;
pub mod weights;

pub use dataset::{Dataset, GroupedConfig, ResponseColumn, SparseConfig, SplitIndices, Standardizer};
pub use error::{Error, Result};
pub use grid::{GridResult, ParameterGrid, ParameterValues};
pub use loss::{ErrorKind, ModelKind};
pub use penalty::{GroupStructure, PenaltyKind, PenaltySpec};
pub use solver::{Coefficients, SolveControls};
pub use tuning::{CvSpec, ErrorMatrix, TvtResult, TvtSpec};
pub use weights::{WeightSet, WeightSpec, WeightTechnique};
