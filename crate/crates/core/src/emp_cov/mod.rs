//! Empirical moments and lagged correlations of the bivariate index, their
//! spline interpolants, and the block covariance used for conditioning.

mod assembly;
mod model;
mod spline;

use serde::{Deserialize, Serialize};

use crate::data::RmmSeries;
use crate::error::{Error, Result};

pub use assembly::{
    assemble_covariance, regularize_factorize, Factorization, GpBlocks, JITTER_LADDER,
};
pub use model::EmpiricalGpModel;
pub use spline::NaturalCubicSpline;

/// Default maximum lag of the correlation table, in days.
pub const DEFAULT_MAX_LAG: usize = 60;

/// Slack allowed on `|r| <= 1` for interpolated correlations.
pub const CORRELATION_BOUND_SLACK: f64 = 1e-9;

/// Per-series sample means and population (divide-by-N) variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

pub fn estimate_means_variances(train: &RmmSeries) -> Result<Moments> {
    let z = train.pairs()?;
    moments_of(&z)
}

pub(crate) fn moments_of(z: &[[f64; 2]]) -> Result<Moments> {
    if z.is_empty() {
        return Err(Error::Estimation("empty training segment".into()));
    }
    let n = z.len() as f64;
    let mut mean = [0.0; 2];
    let mut var = [0.0; 2];
    for j in 0..2 {
        mean[j] = z.iter().map(|p| p[j]).sum::<f64>() / n;
        var[j] = z.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n;
    }
    Ok(Moments { mean, var })
}

/// Sample auto- and cross-correlations at integer lags.
///
/// `r12[h + H]` is `Corr(z1_t, z2_{t+h})` for `h` in `-H..=H`; the auto
/// correlations are stored for `h` in `0..=H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub max_lag: usize,
    pub r11: Vec<f64>,
    pub r22: Vec<f64>,
    pub r12: Vec<f64>,
    pub sample_size: usize,
}

impl CorrelationTable {
    pub fn r12_at(&self, h: isize) -> f64 {
        self.r12[(h + self.max_lag as isize) as usize]
    }

    /// Signed lags `-H..=H`.
    pub fn lags(&self) -> impl Iterator<Item = isize> {
        let h = self.max_lag as isize;
        -h..=h
    }

    pub fn check(&self) -> Result<()> {
        let h = self.max_lag;
        if self.r11.len() != h + 1 || self.r22.len() != h + 1 || self.r12.len() != 2 * h + 1 {
            return Err(Error::Estimation(format!(
                "correlation table lengths ({}, {}, {}) inconsistent with max lag {h}",
                self.r11.len(),
                self.r22.len(),
                self.r12.len()
            )));
        }
        if self.r11[0] != 1.0 || self.r22[0] != 1.0 {
            return Err(Error::Estimation(
                "auto-correlation at lag 0 must be exactly 1".into(),
            ));
        }
        let all = self.r11.iter().chain(&self.r22).chain(&self.r12);
        if let Some(v) = all.into_iter().find(|v| !(v.is_finite() && v.abs() <= 1.0)) {
            return Err(Error::Estimation(format!(
                "correlation {v} outside [-1, 1]"
            )));
        }
        Ok(())
    }
}

/// Estimates lagged correlations over the whole segment.
///
/// Lagged products are summed over all valid `t` and divided by `N` with
/// full-sample means and variances. This keeps every entry in `[-1, 1]` and
/// makes the block-Toeplitz matrices built from the table positive
/// semidefinite.
pub fn estimate_correlations(train: &RmmSeries, max_lag: usize) -> Result<CorrelationTable> {
    let z = train.pairs()?;
    correlations_of(&z, max_lag)
}

pub(crate) fn correlations_of(z: &[[f64; 2]], max_lag: usize) -> Result<CorrelationTable> {
    let n = z.len();
    if n <= max_lag + 1 {
        return Err(Error::Estimation(format!(
            "series of {n} days too short for max lag {max_lag}"
        )));
    }
    let m = moments_of(z)?;
    if m.var.iter().any(|&v| v <= 0.0) {
        return Err(Error::Estimation(
            "zero-variance series has no correlation".into(),
        ));
    }
    let d: [Vec<f64>; 2] = [
        z.iter().map(|p| p[0] - m.mean[0]).collect(),
        z.iter().map(|p| p[1] - m.mean[1]).collect(),
    ];
    let nf = n as f64;
    // Corr(z^a_t, z^b_{t+h}), h >= 0.
    let lagged = |a: usize, b: usize, h: usize| -> f64 {
        let s: f64 = d[a][..n - h]
            .iter()
            .zip(&d[b][h..])
            .map(|(x, y)| x * y)
            .sum();
        (s / (nf * (m.var[a] * m.var[b]).sqrt())).clamp(-1.0, 1.0)
    };

    let mut r11: Vec<f64> = (0..=max_lag).map(|h| lagged(0, 0, h)).collect();
    let mut r22: Vec<f64> = (0..=max_lag).map(|h| lagged(1, 1, h)).collect();
    r11[0] = 1.0;
    r22[0] = 1.0;
    let r12 = (-(max_lag as isize)..=max_lag as isize)
        .map(|h| {
            if h >= 0 {
                lagged(0, 1, h as usize)
            } else {
                // Corr(z1_t, z2_{t-k}) = Corr(z2_s, z1_{s+k})
                lagged(1, 0, (-h) as usize)
            }
        })
        .collect();
    Ok(CorrelationTable {
        max_lag,
        r11,
        r22,
        r12,
        sample_size: n,
    })
}

/// Spline interpolants of the three correlation functions on `[-H, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    max_lag: usize,
    table: CorrelationTable,
    s11: NaturalCubicSpline,
    s22: NaturalCubicSpline,
    s12: NaturalCubicSpline,
}

/// Fits natural cubic splines through the table, mirroring the auto
/// correlations to negative lags.
pub fn fit_spline(table: &CorrelationTable) -> Result<CorrelationFunction> {
    if table.max_lag + 1 < NaturalCubicSpline::MIN_KNOTS {
        return Err(Error::Fit(format!(
            "max lag {} gives {} knots per function, at least {} required",
            table.max_lag,
            table.max_lag + 1,
            NaturalCubicSpline::MIN_KNOTS
        )));
    }
    table.check()?;
    let h = table.max_lag;
    let xs: Vec<f64> = table.lags().map(|l| l as f64).collect();
    let mirror = |r: &[f64]| -> Vec<f64> {
        (0..=2 * h)
            .map(|i| r[(i as isize - h as isize).unsigned_abs()])
            .collect()
    };
    Ok(CorrelationFunction {
        max_lag: h,
        s11: NaturalCubicSpline::new(xs.clone(), mirror(&table.r11))?,
        s22: NaturalCubicSpline::new(xs.clone(), mirror(&table.r22))?,
        s12: NaturalCubicSpline::new(xs, table.r12.clone())?,
        table: table.clone(),
    })
}

impl CorrelationFunction {
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn table(&self) -> &CorrelationTable {
        &self.table
    }

    /// `Corr(z^j_t, z^k_{t+h})` for components `j, k` in `{0, 1}`.
    pub fn eval(&self, j: usize, k: usize, h: f64) -> Result<f64> {
        let (spline, lag) = match (j, k) {
            (0, 0) => (&self.s11, h),
            (1, 1) => (&self.s22, h),
            (0, 1) => (&self.s12, h),
            (1, 0) => (&self.s12, -h),
            _ => {
                return Err(Error::Input(format!(
                    "component pair ({j}, {k}) out of range"
                )))
            }
        };
        spline.eval(lag).ok_or(Error::Range {
            lag: h,
            max_lag: self.max_lag,
        })
    }
}
