//! Empirical Gaussian-process forecasting of the bivariate MJO RMM index.
//!
//! Daily (RMM1, RMM2) pairs are modelled as a stationary bivariate Gaussian
//! process whose covariance comes from sample auto- and cross-correlations.
//! Forecasts are produced by iterating one-step conditioning on a sliding
//! window, with per-lead covariances inflated by validation error.

pub mod data;
pub mod emp_cov;
mod error;
pub mod forecast;
pub mod metrics;

pub use error::{Error, Result};
