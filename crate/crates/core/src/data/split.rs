use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::RmmSeries;
use crate::error::{Error, Result};

/// Date windows and sample counts for training, calibration and testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub valid_start: NaiveDate,
    pub valid_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    /// Conditioning window length in days.
    pub lag: usize,
    /// Number of training windows.
    pub n_train: usize,
    /// Number of validation forecast start points.
    pub n_valid: usize,
    /// Maximum forecast lead in days.
    pub tau_max: usize,
    /// Days between consecutive test forecast start dates.
    pub eval_stride: usize,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_start: ymd(1979, 1, 1),
            train_end: ymd(2016, 12, 31),
            valid_start: ymd(2007, 1, 1),
            valid_end: ymd(2011, 12, 31),
            test_start: ymd(2012, 1, 1),
            test_end: ymd(2023, 12, 31),
            lag: 40,
            n_train: 10_000,
            n_valid: 2_000,
            tau_max: 60,
            eval_stride: 8,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lag", self.lag),
            ("n_train", self.n_train),
            ("n_valid", self.n_valid),
            ("tau_max", self.tau_max),
            ("eval_stride", self.eval_stride),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Split(format!("{name} must be at least 1")));
            }
        }
        for (name, a, b) in [
            ("train", self.train_start, self.train_end),
            ("valid", self.valid_start, self.valid_end),
            ("test", self.test_start, self.test_end),
        ] {
            if b < a {
                return Err(Error::Split(format!(
                    "{name} window ends ({b}) before it starts ({a})"
                )));
            }
        }
        let train_days = days_inclusive(self.train_start, self.train_end);
        if train_days < self.lag + self.n_train {
            return Err(Error::Split(format!(
                "train window has {train_days} days, fewer than lag + n_train = {}",
                self.lag + self.n_train
            )));
        }
        let test_days = days_inclusive(self.test_start, self.test_end);
        if test_days < self.tau_max {
            return Err(Error::Split(format!(
                "test window has {test_days} days, fewer than tau_max = {}",
                self.tau_max
            )));
        }
        Ok(())
    }

    /// Days of data consumed by calibration, counted from `valid_start`: the
    /// first window starts there and the last verification day is
    /// `valid_start + lag + tau_max + n_valid - 2`.
    pub fn calibration_span(&self) -> usize {
        self.lag + self.tau_max + self.n_valid - 1
    }
}

pub(crate) fn days_inclusive(a: NaiveDate, b: NaiveDate) -> usize {
    ((b - a).num_days() + 1).max(0) as usize
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: RmmSeries,
    pub valid: RmmSeries,
    pub test: RmmSeries,
}

/// Cuts the three configured windows out of `series`.
///
/// Train and validation windows may overlap (the default configuration does);
/// the overlap is logged.
pub fn split_dataset(series: &RmmSeries, cfg: &SplitConfig) -> Result<DatasetSplit> {
    cfg.validate()?;
    let cut = |name: &str, from: NaiveDate, to: NaiveDate| -> Result<RmmSeries> {
        let seg = series.slice(from, to).ok_or_else(|| {
            Error::Split(format!(
                "{name} window {from}..{to} is outside the series range {}..{}",
                series.start().map_or("?".into(), |d| d.to_string()),
                series.end().map_or("?".into(), |d| d.to_string()),
            ))
        })?;
        let missing = seg.missing_dates();
        if !missing.is_empty() {
            return Err(Error::SplitMissing {
                window: name.to_string(),
                dates: missing,
            });
        }
        Ok(seg)
    };
    let train = cut("train", cfg.train_start, cfg.train_end)?;
    let valid = cut("valid", cfg.valid_start, cfg.valid_end)?;
    let test = cut("test", cfg.test_start, cfg.test_end)?;

    if cfg.valid_start <= cfg.train_end && cfg.train_start <= cfg.valid_end {
        let from = cfg.valid_start.max(cfg.train_start);
        let to = cfg.valid_end.min(cfg.train_end);
        log::info!(
            "train and validation windows overlap on {from}..{to} ({} days)",
            days_inclusive(from, to)
        );
    }
    Ok(DatasetSplit { train, valid, test })
}
