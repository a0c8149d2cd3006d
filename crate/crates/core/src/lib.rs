//! High-dimensional linear regression by amplified, initially marginal,
//! eigenvector regression (AIMER).
//!
//! The estimator screens columns by marginal correlation, sketches the full
//! Gram matrix through the screened columns, regresses on the resulting
//! approximate principal components and hard-thresholds the coefficients.
//! The crate also carries the baselines it is compared against (PCR, SPC,
//! SPC+lasso, ridge, lasso), a latent-factor simulator, an audit of the
//! "zero marginal covariance implies irrelevance" assumption, and a
//! cross-validation harness.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod estimators;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod screening;
pub mod simulation;
pub mod sketch;

pub use error::{Error, Result};
pub use estimators::{fit, predict, FitResult, HyperParams, Method};
pub use screening::{center, ExpressionDataset, RawDataset, Selection};
