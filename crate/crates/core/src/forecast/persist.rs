//! Model file: a single JSON document.
//!
//! ```text
//! {
//!   "format": "mjo-gp-model",
//!   "version": 1,
//!   "lag": 40,                      // window length L
//!   "max_lag": 60,                  // correlation table extent H
//!   "mean": [m1, m2],
//!   "var": [v1, v2],                // divide-by-N variances
//!   "jitter_used": 0.0,             // diagonal jitter applied to K_XX
//!   "correlation": {
//!     "sample_size": N,
//!     "r11": [...],                 // lags 0..=H
//!     "r22": [...],                 // lags 0..=H
//!     "r12": [...]                  // lags -H..=H, Corr(z1_t, z2_{t+h})
//!   },
//!   "calibration": null | {
//!     "n_valid": 2000,
//!     "bias2": [[b1, b2], ...],     // per lead 1..=tau_max
//!     "entries": [[k11, k12, k22], ...]
//!   }
//! }
//! ```
//!
//! Factorizations are rebuilt on load; the stored jitter and calibration
//! entries are checked against the rebuilt model.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::LeadCovarianceTable;
use crate::data::write_atomic;
use crate::emp_cov::{CorrelationTable, EmpiricalGpModel, Moments};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "mjo-gp-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationKnots {
    pub sample_size: usize,
    pub r11: Vec<f64>,
    pub r22: Vec<f64>,
    pub r12: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub n_valid: usize,
    pub bias2: Vec<[f64; 2]>,
    pub entries: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub lag: usize,
    pub max_lag: usize,
    pub mean: [f64; 2],
    pub var: [f64; 2],
    pub jitter_used: f64,
    pub correlation: CorrelationKnots,
    pub calibration: Option<CalibrationRecord>,
}

impl ModelFile {
    pub fn new(model: &EmpiricalGpModel, table: Option<&LeadCovarianceTable>) -> Self {
        let t = model.table();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            lag: model.lag(),
            max_lag: t.max_lag,
            mean: model.moments().mean,
            var: model.moments().var,
            jitter_used: model.jitter_used(),
            correlation: CorrelationKnots {
                sample_size: t.sample_size,
                r11: t.r11.clone(),
                r22: t.r22.clone(),
                r12: t.r12.clone(),
            },
            calibration: table.map(|c| CalibrationRecord {
                n_valid: c.n_valid,
                bias2: c.bias2.clone(),
                entries: c
                    .entries
                    .iter()
                    .map(|k| [k[(0, 0)], k[(0, 1)], k[(1, 1)]])
                    .collect(),
            }),
        }
    }

    pub fn into_model(self) -> Result<(EmpiricalGpModel, Option<LeadCovarianceTable>)> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Persist(format!(
                "unexpected format tag {:?}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Persist(format!(
                "model file version {} is not supported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        let table = CorrelationTable {
            max_lag: self.max_lag,
            r11: self.correlation.r11,
            r22: self.correlation.r22,
            r12: self.correlation.r12,
            sample_size: self.correlation.sample_size,
        };
        table.check().map_err(|e| Error::Persist(e.to_string()))?;
        let moments = Moments {
            mean: self.mean,
            var: self.var,
        };
        let model = EmpiricalGpModel::from_parts(moments, &table, self.lag)?;
        if model.jitter_used() != self.jitter_used {
            log::warn!(
                "rebuilt factorization used jitter {:e}, file recorded {:e}",
                model.jitter_used(),
                self.jitter_used
            );
        }
        let calibration = match self.calibration {
            None => None,
            Some(rec) => {
                let table = LeadCovarianceTable::from_bias(
                    *model.step_covariance(),
                    rec.bias2,
                    rec.n_valid,
                )
                .map_err(|e| Error::Persist(e.to_string()))?;
                if rec.entries.len() != table.entries.len() {
                    return Err(Error::Persist(format!(
                        "calibration lists {} entries for {} leads",
                        rec.entries.len(),
                        table.entries.len()
                    )));
                }
                for (tau, (stored, rebuilt)) in rec.entries.iter().zip(&table.entries).enumerate() {
                    let stored = Matrix2::new(stored[0], stored[1], stored[1], stored[2]);
                    if (stored - rebuilt).abs().max() > 1e-12 {
                        return Err(Error::Persist(format!(
                            "calibration entry for lead {} inconsistent with the model",
                            tau + 1
                        )));
                    }
                }
                Some(table)
            }
        };
        Ok((model, calibration))
    }
}

pub fn model_to_json(model: &EmpiricalGpModel, table: Option<&LeadCovarianceTable>) -> String {
    serde_json::to_string_pretty(&ModelFile::new(model, table)).expect("model file serializes")
}

pub fn model_from_json(text: &str) -> Result<(EmpiricalGpModel, Option<LeadCovarianceTable>)> {
    let file: ModelFile = serde_json::from_str(text)
        .map_err(|e| Error::Persist(format!("malformed model file: {e}")))?;
    file.into_model()
}

pub fn save_model(
    path: &Path,
    model: &EmpiricalGpModel,
    table: Option<&LeadCovarianceTable>,
) -> Result<()> {
    let mut text = model_to_json(model, table);
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<(EmpiricalGpModel, Option<LeadCovarianceTable>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Persist(format!("cannot read {}: {e}", path.display())))?;
    model_from_json(&text)
}
