//! Command-line pipeline: fetch, fit, calibrate, forecast and evaluate.

pub mod commands;
pub mod config;

use std::fmt;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_FETCH: u8 = 2;
pub const EXIT_FIT: u8 = 3;
pub const EXIT_CALIBRATE: u8 = 4;
pub const EXIT_FORECAST: u8 = 5;
pub const EXIT_EVALUATE: u8 = 6;

pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0  success
  1  invalid configuration or usage
  2  fetch failed (network and cache both unavailable, or bad feed)
  3  fit failed (split, estimation, assembly or factorization)
  4  calibration failed (missing model or short validation span)
  5  forecast failed (uncalibrated model or insufficient history)
  6  evaluation failed (too few admissible start dates)";

/// Failure carrying the process exit code of its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Runs `f` on a pool of `threads` workers; 0 means one per core.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
