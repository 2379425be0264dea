//! Penalized quantile regression for time-series forecasting.
//!
//! The crate fits linear quantile (and least-squares) models under a
//! sparse-group lasso penalty family: plain lasso, adaptive lasso, pure
//! group lasso, sparse-group lasso, and the adaptive sparse-group variant.
//! Around the estimator it provides the machinery a forecasting study
//! needs: stationarity and normality diagnostics, lasso-path feature
//! ranking, forward-chaining cross-validation, expanding-window
//! multi-quantile forecasts, and error metrics.
//!
//! Everything is generic over the scalar type through [`Float`], with
//! `f64` the intended default. Concrete aliases such as [`Dataset64`]
//! are exported at the crate root.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod feature_select;
pub mod forecast;
pub(crate) mod linalg;
pub mod loss;
pub mod lp;
pub mod model_selection;
pub mod penalty;
pub mod solver;
pub mod synthetic;

use ndarray::NdFloat;
use num_traits::FromPrimitive;
use std::iter::Sum;
use std::str::FromStr;

/// Scalar type the whole crate is generic over.
///
/// `NdFloat` brings the arithmetic, assignment operators and formatting
/// bounds `ndarray` needs; the rest covers parsing, summation and the
/// `cast` helper used for numeric constants.
pub trait Float: NdFloat + FromPrimitive + Sum + FromStr + Default {
    /// Converts an `f64` constant into `Self`. Panics on values that do
    /// not fit, which cannot happen for the finite constants used here.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }
}

impl Float for f32 {}
impl Float for f64 {}

pub use dataset::{GroupStructure, Standardization, TargetKind, TimeSeriesDataset};
pub use error::{Error, Result};
pub use penalty::{Method, PenaltySpec};
pub use solver::{FitResult, PresetHyperparams, SolverConfig};

/// Dataset with `f64` storage.
pub type Dataset64 = TimeSeriesDataset<f64>;
/// Dataset with `f32` storage.
pub type Dataset32 = TimeSeriesDataset<f32>;
/// Fit result with `f64` storage.
pub type FitResult64 = FitResult<f64>;
/// Fit result with `f32` storage.
pub type FitResult32 = FitResult<f32>;
