use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fetch failed: {0}")]
    Fetch(String),

    #[error("fetch failed with HTTP status {status}: {url}")]
    FetchStatus { url: String, status: u16 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("split error: missing values inside {window} window on {}", format_dates(.dates))]
    SplitMissing {
        window: String,
        dates: Vec<NaiveDate>,
    },

    #[error("window error: segment has {have} days but {need} are required")]
    Window { need: usize, have: usize },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("spline fit error: {0}")]
    Fit(String),

    #[error("lag {lag} outside the interpolated range [-{max_lag}, {max_lag}]")]
    Range { lag: f64, max_lag: usize },

    #[error("assembly error: lag {lag} requires correlations up to {lag} days, only {max_lag} available")]
    Assembly { lag: usize, max_lag: usize },

    #[error("conditioning error: factorization failed at maximum jitter; smallest eigenvalue estimate {min_eigenvalue:e}")]
    Conditioning { min_eigenvalue: f64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error(
        "confidence region error: covariance is not positive definite (eigenvalues {0:e}, {1:e})"
    )]
    Region(f64, f64),

    #[error("score error: {0}")]
    Score(String),

    #[error("model file error: {0}")]
    Persist(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_dates(dates: &[NaiveDate]) -> String {
    const SHOWN: usize = 10;
    let mut s = dates
        .iter()
        .take(SHOWN)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if dates.len() > SHOWN {
        s.push_str(&format!(" (+{} more)", dates.len() - SHOWN));
    }
    s
}
