//! Run configuration: a flat `key = value` file plus command-line overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! | key | default |
//! |-----|---------|
//! | `data_url` | the published real-time RMM feed |
//! | `cache_path` | `data/rmm.74toRealtime.txt` |
//! | `offline` | `false` |
//! | `timeout_secs` | `30` |
//! | `train_start`, `train_end` | `1979-01-01`, `2016-12-31` |
//! | `valid_start`, `valid_end` | `2007-01-01`, `2011-12-31` |
//! | `test_start`, `test_end` | `2012-01-01`, `2023-12-31` |
//! | `lag` | `40` |
//! | `max_lag` | `60` |
//! | `n_train` | `10000` |
//! | `n_valid` | `2000` |
//! | `tau_max` | `60` |
//! | `eval_stride` | `8` |
//! | `n_predictions` | `528` |
//! | `hss_leads` | `40` |
//! | `alpha` | `0.05` |
//! | `confidence` | `0.68` |
//! | `exact_nll` | `false` |
//! | `threads` | `0` (all cores) |
//! | `model_path` | `model.json` |
//! | `output_dir` | `out` |
//!
//! Relative paths in a file are resolved against the file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use mjo_gp::data::{SplitConfig, DEFAULT_RMM_URL};
use mjo_gp::emp_cov::DEFAULT_MAX_LAG;
use mjo_gp::metrics::{DEFAULT_ALPHA, DEFAULT_HSS_LEADS};

use crate::CliError;

pub const DEFAULT_CONFIDENCE: f64 = 0.68;
pub const DEFAULT_PREDICTIONS: usize = 528;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_url: String,
    pub cache_path: PathBuf,
    pub offline: bool,
    pub timeout_secs: u64,
    pub split: SplitConfig,
    pub max_lag: usize,
    pub n_predictions: usize,
    pub hss_leads: usize,
    pub alpha: f64,
    pub confidence: f64,
    pub exact_nll: bool,
    pub threads: usize,
    pub model_path: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_url: DEFAULT_RMM_URL.to_string(),
            cache_path: PathBuf::from("data/rmm.74toRealtime.txt"),
            offline: false,
            timeout_secs: 30,
            split: SplitConfig::default(),
            max_lag: DEFAULT_MAX_LAG,
            n_predictions: DEFAULT_PREDICTIONS,
            hss_leads: DEFAULT_HSS_LEADS,
            alpha: DEFAULT_ALPHA,
            confidence: DEFAULT_CONFIDENCE,
            exact_nll: false,
            threads: 0,
            model_path: PathBuf::from("model.json"),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_url: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub offline: bool,
    pub lag: Option<usize>,
    pub tau: Option<usize>,
    pub stride: Option<usize>,
    pub n_predictions: Option<usize>,
    pub confidence: Option<f64>,
    pub threads: Option<usize>,
    pub exact_nll: bool,
    pub model_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| {
        CliError::config(format!(
            "line {line}: invalid value {value:?} for {key}: {e}"
        ))
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::config(format!(
            "line {line}: invalid value {value:?} for {key}: expected true or false"
        ))),
    }
}

impl RunConfig {
    /// Applies `key = value` lines from `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, base_dir: &Path) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::config(format!(
                    "line {line}: expected key = value, got {trimmed:?}"
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let path = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_relative() {
                    base_dir.join(p)
                } else {
                    p
                }
            };
            let date = |v: &str| parse::<NaiveDate>(key, v, line);
            let s = &mut self.split;
            match key {
                "data_url" => self.data_url = value.to_string(),
                "cache_path" => self.cache_path = path(value),
                "offline" => self.offline = parse_bool(key, value, line)?,
                "timeout_secs" => self.timeout_secs = parse(key, value, line)?,
                "train_start" => s.train_start = date(value)?,
                "train_end" => s.train_end = date(value)?,
                "valid_start" => s.valid_start = date(value)?,
                "valid_end" => s.valid_end = date(value)?,
                "test_start" => s.test_start = date(value)?,
                "test_end" => s.test_end = date(value)?,
                "lag" => s.lag = parse(key, value, line)?,
                "n_train" => s.n_train = parse(key, value, line)?,
                "n_valid" => s.n_valid = parse(key, value, line)?,
                "tau_max" => s.tau_max = parse(key, value, line)?,
                "eval_stride" => s.eval_stride = parse(key, value, line)?,
                "max_lag" => self.max_lag = parse(key, value, line)?,
                "n_predictions" => self.n_predictions = parse(key, value, line)?,
                "hss_leads" => self.hss_leads = parse(key, value, line)?,
                "alpha" => self.alpha = parse(key, value, line)?,
                "confidence" => self.confidence = parse(key, value, line)?,
                "exact_nll" => self.exact_nll = parse_bool(key, value, line)?,
                "threads" => self.threads = parse(key, value, line)?,
                "model_path" => self.model_path = path(value),
                "output_dir" => self.output_dir = path(value),
                _ => {
                    return Err(CliError::config(format!(
                        "line {line}: unknown key {key:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = &o.data_url {
            self.data_url = v.clone();
        }
        if let Some(v) = &o.cache_path {
            self.cache_path = v.clone();
        }
        self.offline |= o.offline;
        if let Some(v) = o.lag {
            self.split.lag = v;
        }
        if let Some(v) = o.tau {
            self.split.tau_max = v;
        }
        if let Some(v) = o.stride {
            self.split.eval_stride = v;
        }
        if let Some(v) = o.n_predictions {
            self.n_predictions = v;
        }
        if let Some(v) = o.confidence {
            self.confidence = v;
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        self.exact_nll |= o.exact_nll;
        if let Some(v) = &o.model_path {
            self.model_path = v.clone();
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(CliError::config(format!(
                "confidence {} must be in (0, 1)",
                self.confidence
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!(
                "alpha {} must be in (0, 1)",
                self.alpha
            )));
        }
        if self.n_predictions == 0 {
            return Err(CliError::config("n_predictions must be at least 1"));
        }
        self.split
            .validate()
            .map_err(|e| CliError::config(e.to_string()))
    }

    /// Defaults, then the optional file, then the overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", p.display()))
            })?;
            let base = p.parent().unwrap_or_else(|| Path::new("."));
            cfg.apply_text(&text, base)?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}
