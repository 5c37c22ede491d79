use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{
    assemble_covariance, correlations_of, fit_spline, moments_of, regularize_factorize,
    CorrelationFunction, CorrelationTable, Factorization, GpBlocks, Moments,
};
use crate::data::RmmSeries;
use crate::error::{Error, Result};

/// Stationary empirical GP over the bivariate index with a fixed window length.
///
/// The one-step gain `K_yX K_XX^{-1}` and posterior covariance are computed
/// once here; every forecast step reuses them.
#[derive(Debug, Clone)]
pub struct EmpiricalGpModel {
    moments: Moments,
    corr: CorrelationFunction,
    blocks: GpBlocks,
    factor: Factorization,
    gain: DMatrix<f64>,
    step_cov: Matrix2<f64>,
}

impl EmpiricalGpModel {
    /// Estimates moments and correlations on `segment` and builds the model.
    pub fn fit(segment: &RmmSeries, lag: usize, max_lag: usize) -> Result<Self> {
        let z = segment.pairs()?;
        let moments = moments_of(&z)?;
        let table = correlations_of(&z, max_lag)?;
        Self::from_parts(moments, &table, lag)
    }

    /// Builds the model from already estimated moments and correlations.
    pub fn from_parts(moments: Moments, table: &CorrelationTable, lag: usize) -> Result<Self> {
        if moments.var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Estimation(format!(
                "variances must be positive, got {:?}",
                moments.var
            )));
        }
        let corr = fit_spline(table)?;
        let blocks = assemble_covariance(&corr, &moments, lag)?;
        let factor = regularize_factorize(&blocks.k_xx)?;

        // K_XX^{-1} K_Xy, one column per output component.
        let solved = factor.chol.solve(&blocks.k_yx.transpose());
        let gain = solved.transpose();
        let reduction = &blocks.k_yx * &solved;
        let mut step_cov = blocks.k_yy - Matrix2::from_iterator(reduction.iter().copied());
        let off = 0.5 * (step_cov[(0, 1)] + step_cov[(1, 0)]);
        step_cov[(0, 1)] = off;
        step_cov[(1, 0)] = off;
        if !(step_cov[(0, 0)] > 0.0 && step_cov[(1, 1)] > 0.0) {
            return Err(Error::Estimation(format!(
                "one-step posterior covariance has non-positive diagonal: {step_cov:?}"
            )));
        }
        Ok(Self {
            moments,
            corr,
            blocks,
            factor,
            gain,
            step_cov,
        })
    }

    pub fn lag(&self) -> usize {
        self.blocks.lag
    }

    pub fn max_lag(&self) -> usize {
        self.corr.max_lag()
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    pub fn correlation(&self) -> &CorrelationFunction {
        &self.corr
    }

    pub fn table(&self) -> &CorrelationTable {
        self.corr.table()
    }

    pub fn blocks(&self) -> &GpBlocks {
        &self.blocks
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.factor.jitter_used
    }

    /// `K_yX K_XX^{-1}`, shape `2 x 2L`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// One-step posterior covariance; identical for every window.
    pub fn step_covariance(&self) -> &Matrix2<f64> {
        &self.step_cov
    }

    pub fn prior_mean_x(&self) -> &DVector<f64> {
        &self.blocks.mean_x
    }

    pub fn prior_mean_y(&self) -> &Vector2<f64> {
        &self.blocks.mean_y
    }
}
