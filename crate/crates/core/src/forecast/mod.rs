//! One-step conditioning, iterated multistep rollout, lead-time covariance
//! calibration and confidence regions.

mod calibration;
mod ellipse;
mod persist;

use std::collections::VecDeque;

use chrono::NaiveDate;
use nalgebra::{DVector, Matrix2, Vector2};

use crate::emp_cov::EmpiricalGpModel;
use crate::error::{Error, Result};

pub use calibration::{
    attach_calibration, calibrate_covariance, rescale_covariance, LeadCovarianceTable,
};
pub use ellipse::{chi2_2_quantile, confidence_region, Ellipse, POLYGON_POINTS};
pub use persist::{
    load_model, model_from_json, model_to_json, save_model, ModelFile, MODEL_FORMAT, MODEL_VERSION,
};

/// Predictive distribution of the next day given a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPosterior {
    pub mu: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

/// Conditions on a `2L` window laid out as RMM1 oldest to newest, then RMM2
/// oldest to newest.
pub fn posterior_step(window: &DVector<f64>, model: &EmpiricalGpModel) -> Result<StepPosterior> {
    let dim = 2 * model.lag();
    if window.len() != dim {
        return Err(Error::Input(format!(
            "window has {} entries, expected {dim}",
            window.len()
        )));
    }
    if let Some(i) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("window entry {i} is not finite")));
    }
    Ok(StepPosterior {
        mu: step_mean(window, model),
        cov: *model.step_covariance(),
    })
}

fn step_mean(window: &DVector<f64>, model: &EmpiricalGpModel) -> Vector2<f64> {
    let g = model.gain();
    let mx = model.prior_mean_x();
    let mut mu = *model.prior_mean_y();
    for j in 0..2 {
        let mut acc = 0.0;
        for a in 0..window.len() {
            acc += g[(j, a)] * (window[a] - mx[a]);
        }
        mu[j] += acc;
    }
    mu
}

/// Stacks `L` chronological daily pairs into the model's window layout.
pub fn window_from_pairs(days: &[[f64; 2]]) -> DVector<f64> {
    let lag = days.len();
    DVector::from_fn(2 * lag, |a, _| days[a % lag][a / lag])
}

/// Per-lead forecast from one start date.
///
/// `start_date` is the first forecast day; lead `tau` verifies on
/// `start_date + tau - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPath {
    pub start_date: NaiveDate,
    pub mu_path: Vec<[f64; 2]>,
    /// Corrected covariances, present once a calibration table is attached.
    pub cov_path: Option<Vec<Matrix2<f64>>>,
    /// Number of predicted values inside the conditioning window at each lead.
    pub window_provenance: Vec<usize>,
}

impl ForecastPath {
    pub fn tau(&self) -> usize {
        self.mu_path.len()
    }
}

/// Iterated one-step forecasting: each posterior mean is appended to the
/// window as a pseudo-observation for the next step.
pub fn forecast_iterative(
    start_date: NaiveDate,
    history: &[[f64; 2]],
    model: &EmpiricalGpModel,
    tau: usize,
) -> Result<ForecastPath> {
    let lag = model.lag();
    if tau < 1 {
        return Err(Error::Input("lead time must be at least 1".into()));
    }
    if history.len() != lag {
        return Err(Error::Input(format!(
            "history has {} days, expected exactly L = {lag}",
            history.len()
        )));
    }
    if history.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("history contains non-finite values".into()));
    }

    let mut window: VecDeque<[f64; 2]> = history.iter().copied().collect();
    let mut buf = DVector::zeros(2 * lag);
    let mut mu_path = Vec::with_capacity(tau);
    let mut window_provenance = Vec::with_capacity(tau);
    for step in 0..tau {
        for (p, day) in window.iter().enumerate() {
            buf[p] = day[0];
            buf[lag + p] = day[1];
        }
        let mu = step_mean(&buf, model);
        mu_path.push([mu[0], mu[1]]);
        window_provenance.push(step.min(lag));
        window.pop_front();
        window.push_back([mu[0], mu[1]]);
    }
    Ok(ForecastPath {
        start_date,
        mu_path,
        cov_path: None,
        window_provenance,
    })
}
