use nalgebra::Matrix2;
use rayon::prelude::*;

use super::{forecast_iterative, ForecastPath};
use crate::data::RmmSeries;
use crate::emp_cov::EmpiricalGpModel;
use crate::error::{Error, Result};

/// Corrected 2x2 forecast covariance for every lead `1..=tau_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadCovarianceTable {
    /// The uncorrected one-step covariance the table was built from.
    pub base: Matrix2<f64>,
    /// `entries[tau - 1]` is the corrected covariance at lead `tau`.
    pub entries: Vec<Matrix2<f64>>,
    /// Mean squared validation error per component and lead.
    pub bias2: Vec<[f64; 2]>,
    pub n_valid: usize,
}

impl LeadCovarianceTable {
    /// Rebuilds the table from the one-step covariance and squared biases.
    pub fn from_bias(base: Matrix2<f64>, bias2: Vec<[f64; 2]>, n_valid: usize) -> Result<Self> {
        if bias2.is_empty() {
            return Err(Error::Calibration("empty bias table".into()));
        }
        if let Some(b) = bias2
            .iter()
            .flatten()
            .find(|b| !(b.is_finite() && **b >= 0.0))
        {
            return Err(Error::Calibration(format!("invalid squared bias {b}")));
        }
        let entries = bias2
            .iter()
            .map(|b| rescale_covariance(&base, base[(0, 0)] + b[0], base[(1, 1)] + b[1]))
            .collect();
        Ok(Self {
            base,
            entries,
            bias2,
            n_valid,
        })
    }

    pub fn tau_max(&self) -> usize {
        self.entries.len()
    }

    pub fn at_lead(&self, tau: usize) -> Option<&Matrix2<f64>> {
        tau.checked_sub(1).and_then(|i| self.entries.get(i))
    }
}

/// Sets the diagonal of `k` to `(v1, v2)` while preserving its correlation
/// coefficient.
pub fn rescale_covariance(k: &Matrix2<f64>, v1: f64, v2: f64) -> Matrix2<f64> {
    let scale = (v1.sqrt() * v2.sqrt()) / (k[(0, 0)].sqrt() * k[(1, 1)].sqrt());
    let off = k[(0, 1)] * scale;
    Matrix2::new(v1, off, off, v2)
}

/// Runs `n_valid` rollouts on consecutive start points of `valid` and inflates
/// the one-step covariance by the mean squared error at each lead.
///
/// Start point `i` conditions on days `i..i+L` of `valid` and verifies lead
/// `tau` on day `i + L + tau - 1`, so `valid` must hold at least
/// `L + tau_max + n_valid - 1` days.
pub fn calibrate_covariance(
    model: &EmpiricalGpModel,
    valid: &RmmSeries,
    tau_max: usize,
    n_valid: usize,
) -> Result<LeadCovarianceTable> {
    if n_valid == 0 {
        return Err(Error::Calibration(
            "validation sample count must be at least 1".into(),
        ));
    }
    if tau_max == 0 {
        return Err(Error::Calibration("tau_max must be at least 1".into()));
    }
    let lag = model.lag();
    let need = lag + tau_max + n_valid - 1;
    if valid.len() < need {
        return Err(Error::Calibration(format!(
            "validation span has {} days; L + tau_max + n_v - 1 = {need} are required",
            valid.len()
        )));
    }
    let z = valid
        .slice_index(0..need)
        .pairs()
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let start = valid.start().expect("non-empty validation span");

    // Per-start squared errors, collected in start order so the reduction
    // below is independent of scheduling.
    let sq_errors: Vec<Vec<[f64; 2]>> = (0..n_valid)
        .into_par_iter()
        .map(|i| -> Result<Vec<[f64; 2]>> {
            let day = start + chrono::Duration::days((i + lag) as i64);
            let path = forecast_iterative(day, &z[i..i + lag], model, tau_max)?;
            Ok(path
                .mu_path
                .iter()
                .enumerate()
                .map(|(k, mu)| {
                    let truth = z[i + lag + k];
                    [(mu[0] - truth[0]).powi(2), (mu[1] - truth[1]).powi(2)]
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut bias2 = vec![[0.0; 2]; tau_max];
    for errs in &sq_errors {
        for (acc, e) in bias2.iter_mut().zip(errs) {
            acc[0] += e[0];
            acc[1] += e[1];
        }
    }
    let nv = n_valid as f64;
    for b in &mut bias2 {
        b[0] /= nv;
        b[1] /= nv;
    }
    LeadCovarianceTable::from_bias(*model.step_covariance(), bias2, n_valid)
}

/// Attaches the lead-dependent covariances; they do not depend on the start date.
pub fn attach_calibration(
    mut path: ForecastPath,
    table: &LeadCovarianceTable,
) -> Result<ForecastPath> {
    if path.tau() > table.tau_max() {
        return Err(Error::Calibration(format!(
            "path has {} leads but the calibration table covers only {}",
            path.tau(),
            table.tau_max()
        )));
    }
    path.cov_path = Some(table.entries[..path.tau()].to_vec());
    Ok(path)
}
