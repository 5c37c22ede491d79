//! Pipeline steps. Each returns a report whose `summary` is printed by the
//! binary; failures carry the exit code of the step.
//!
//! Output schemas (comma separated, one header line):
//!
//! * `forecast_<start>.csv`: `start_date,lead,valid_date,mu1,mu2,var1,var2,cov12,
//!   semi_major,semi_minor,angle_deg,obs1,obs2,obs_inside`. Observation columns
//!   are empty when the verification day is not in the dataset.
//! * `ellipse_<start>.csv`: `start_date,lead,point,x,y`, 64 boundary points per lead.
//! * `skill.csv`: `lead,n_p,cor,rmse,phase_error_deg,amplitude_error,crps,log_score`.
//! * `hss.csv`: `category,lead,a,b,c,d,hss,p_value,significant`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use mjo_gp::data::{
    fetch_rmm, parse_rmm_text, rolling_windows, split_dataset, FetchOptions, RmmSeries,
};
use mjo_gp::emp_cov::EmpiricalGpModel;
use mjo_gp::forecast::{
    attach_calibration, calibrate_covariance, confidence_region, forecast_iterative, load_model,
    save_model, Ellipse, ForecastPath, LeadCovarianceTable, POLYGON_POINTS,
};
use mjo_gp::metrics::{PairedSample, SkillReport};
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::{CliError, EXIT_CALIBRATE, EXIT_EVALUATE, EXIT_FETCH, EXIT_FIT, EXIT_FORECAST};

fn fail(code: u8) -> impl Fn(mjo_gp::Error) -> CliError {
    move |e| CliError::new(code, e.to_string())
}

fn days(n: usize) -> chrono::Duration {
    chrono::Duration::days(n as i64)
}

/// Reads and parses the cached feed.
pub fn load_series(path: &Path) -> mjo_gp::Result<RmmSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| mjo_gp::Error::Fetch(format!("cannot read cache {}: {e}", path.display())))?;
    parse_rmm_text(&text)
}

fn write_file(path: &Path, text: &str, code: u8) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::new(code, format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::new(code, format!("cannot write {}: {e}", path.display())))
}

fn load_calibrated(
    cfg: &RunConfig,
    code: u8,
) -> Result<(EmpiricalGpModel, LeadCovarianceTable), CliError> {
    let (model, table) = load_model(&cfg.model_path).map_err(fail(code))?;
    let table = table.ok_or_else(|| {
        CliError::new(
            code,
            format!(
                "model {} has no calibration table; run calibrate first",
                cfg.model_path.display()
            ),
        )
    })?;
    warn_lag_mismatch(cfg, &model);
    Ok((model, table))
}

fn warn_lag_mismatch(cfg: &RunConfig, model: &EmpiricalGpModel) {
    if cfg.split.lag != model.lag() {
        log::warn!(
            "configured lag {} differs from the model's lag {}; using the model",
            cfg.split.lag,
            model.lag()
        );
    }
}

#[derive(Debug, Clone)]
pub struct FetchReport {
    pub records: usize,
    pub first: Option<NaiveDate>,
    pub last: Option<NaiveDate>,
    pub missing: usize,
}

impl FetchReport {
    pub fn summary(&self) -> String {
        let range = match (self.first, self.last) {
            (Some(a), Some(b)) => format!("{a} to {b}"),
            _ => "no dates".into(),
        };
        format!(
            "{} daily records, {range}, {} missing",
            self.records, self.missing
        )
    }
}

pub fn fetch(cfg: &RunConfig) -> Result<FetchReport, CliError> {
    let opts = FetchOptions {
        offline: cfg.offline,
        timeout: Duration::from_secs(cfg.timeout_secs),
    };
    if cfg.offline {
        log::warn!(
            "offline: reading {} without refreshing",
            cfg.cache_path.display()
        );
    }
    let text = fetch_rmm(&cfg.data_url, &cfg.cache_path, &opts).map_err(fail(EXIT_FETCH))?;
    let series = parse_rmm_text(&text).map_err(fail(EXIT_FETCH))?;
    Ok(FetchReport {
        records: series.len(),
        first: series.start(),
        last: series.end(),
        missing: series.missing_dates().len(),
    })
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub lag: usize,
    pub max_lag: usize,
    pub samples: usize,
    pub jitter_used: f64,
    pub r11_1: f64,
    pub r22_1: f64,
    pub peak_cross: (isize, f64),
    pub step_cov: Matrix2<f64>,
}

impl FitReport {
    pub fn summary(&self) -> String {
        let k = &self.step_cov;
        format!(
            "lag {} with correlations to {} days from {} training days\n\
             jitter_used {:e}\n\
             r11(1) {:.4}  r22(1) {:.4}  largest |r12| {:.4} at lag {}\n\
             one-step covariance [[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            self.lag,
            self.max_lag,
            self.samples,
            self.jitter_used,
            self.r11_1,
            self.r22_1,
            self.peak_cross.1,
            self.peak_cross.0,
            k[(0, 0)],
            k[(0, 1)],
            k[(1, 0)],
            k[(1, 1)]
        )
    }
}

/// Estimates the model on the span covered by the `n_train` rolling windows
/// at the start of the training window.
pub fn fit(cfg: &RunConfig) -> Result<FitReport, CliError> {
    let s = &cfg.split;
    let series = load_series(&cfg.cache_path).map_err(fail(EXIT_FIT))?;
    let split = split_dataset(&series, s).map_err(fail(EXIT_FIT))?;
    let windows = rolling_windows(&split.train, s.lag, s.n_train).map_err(fail(EXIT_FIT))?;
    let segment = split.train.slice_index(0..s.lag + s.n_train);
    log::info!(
        "training matrix {} x {}",
        2 * windows.lag(),
        windows.samples()
    );
    let model = EmpiricalGpModel::fit(&segment, s.lag, cfg.max_lag).map_err(fail(EXIT_FIT))?;
    save_model(&cfg.model_path, &model, None).map_err(fail(EXIT_FIT))?;

    let t = model.table();
    let peak_cross = t
        .lags()
        .map(|h| (h, t.r12_at(h)))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((0, 0.0));
    Ok(FitReport {
        lag: model.lag(),
        max_lag: model.max_lag(),
        samples: segment.len(),
        jitter_used: model.jitter_used(),
        r11_1: t.r11[1],
        r22_1: t.r22[1],
        peak_cross,
        step_cov: *model.step_covariance(),
    })
}

#[derive(Debug, Clone)]
pub struct CalibrateReport {
    pub table: LeadCovarianceTable,
    pub span: (NaiveDate, NaiveDate),
}

impl CalibrateReport {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "calibrated {} leads on {} rollouts over {}..{}\nlead,sd1,sd2,corr\n",
            self.table.tau_max(),
            self.table.n_valid,
            self.span.0,
            self.span.1
        );
        for (i, k) in self.table.entries.iter().enumerate() {
            let (s1, s2) = (k[(0, 0)].sqrt(), k[(1, 1)].sqrt());
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                i + 1,
                s1,
                s2,
                k[(0, 1)] / (s1 * s2)
            );
        }
        out.pop();
        out
    }
}

/// Inflates the one-step covariance by validation rollout errors and stores
/// the table in the model file.
///
/// Rollouts start at `valid_start` and need `L + tau_max + n_valid - 1` days,
/// which may run past `valid_end`.
pub fn calibrate(cfg: &RunConfig) -> Result<CalibrateReport, CliError> {
    let s = &cfg.split;
    let (model, _) = load_model(&cfg.model_path).map_err(fail(EXIT_CALIBRATE))?;
    warn_lag_mismatch(cfg, &model);
    let series = load_series(&cfg.cache_path).map_err(fail(EXIT_CALIBRATE))?;
    let need = model.lag() + s.tau_max + s.n_valid - 1;
    let first = series.index_of(s.valid_start).ok_or_else(|| {
        CliError::new(
            EXIT_CALIBRATE,
            format!("validation start {} is not in the dataset", s.valid_start),
        )
    })?;
    let available = series.len() - first;
    if available < need {
        return Err(CliError::new(
            EXIT_CALIBRATE,
            format!(
                "validation span from {} has {available} days; L + tau_max + n_v - 1 = {need} are required",
                s.valid_start
            ),
        ));
    }
    let span = series.slice_index(first..first + need);
    let end = s.valid_start + days(need - 1);
    if end > s.valid_end {
        log::warn!(
            "validation rollouts run to {end}, past the validation window end {}",
            s.valid_end
        );
    }
    let table =
        calibrate_covariance(&model, &span, s.tau_max, s.n_valid).map_err(fail(EXIT_CALIBRATE))?;
    save_model(&cfg.model_path, &model, Some(&table)).map_err(fail(EXIT_CALIBRATE))?;
    Ok(CalibrateReport {
        table,
        span: (s.valid_start, end),
    })
}

/// History of the `lag` days before `start` if all are present.
fn history(series: &RmmSeries, start: NaiveDate, lag: usize) -> Option<Vec<[f64; 2]>> {
    let from = start - days(lag);
    let i = series.index_of(from)?;
    if i + lag > series.len() {
        return None;
    }
    series.slice_index(i..i + lag).pairs().ok()
}

#[derive(Debug, Clone)]
pub struct ForecastRow {
    pub lead: usize,
    pub valid_date: NaiveDate,
    pub mu: [f64; 2],
    pub cov: Matrix2<f64>,
    pub ellipse: Ellipse,
    pub obs: Option<[f64; 2]>,
}

impl ForecastRow {
    pub fn obs_inside(&self) -> Option<bool> {
        self.obs.map(|o| self.ellipse.contains(o))
    }
}

#[derive(Debug, Clone)]
pub struct ForecastReport {
    pub start: NaiveDate,
    pub rows: Vec<ForecastRow>,
    pub forecast_file: PathBuf,
    pub ellipse_file: PathBuf,
}

impl ForecastReport {
    pub fn summary(&self) -> String {
        let verified: Vec<bool> = self
            .rows
            .iter()
            .filter_map(ForecastRow::obs_inside)
            .collect();
        let inside = verified.iter().filter(|b| **b).count();
        format!(
            "{} leads from {}; observations inside the region on {inside} of {} verified days\n{}\n{}",
            self.rows.len(),
            self.start,
            verified.len(),
            self.forecast_file.display(),
            self.ellipse_file.display()
        )
    }
}

fn forecast_csv(start: NaiveDate, rows: &[ForecastRow]) -> String {
    let mut out = String::from(
        "start_date,lead,valid_date,mu1,mu2,var1,var2,cov12,semi_major,semi_minor,angle_deg,obs1,obs2,obs_inside\n",
    );
    for r in rows {
        let (o1, o2, inside) = match (r.obs, r.obs_inside()) {
            (Some(o), Some(b)) => (o[0].to_string(), o[1].to_string(), u8::from(b).to_string()),
            _ => Default::default(),
        };
        let _ = writeln!(
            out,
            "{start},{},{},{},{},{},{},{},{},{},{},{o1},{o2},{inside}",
            r.lead,
            r.valid_date,
            r.mu[0],
            r.mu[1],
            r.cov[(0, 0)],
            r.cov[(1, 1)],
            r.cov[(0, 1)],
            r.ellipse.semi_axes[0],
            r.ellipse.semi_axes[1],
            r.ellipse.orientation_deg()
        );
    }
    out
}

fn ellipse_csv(start: NaiveDate, rows: &[ForecastRow]) -> String {
    let mut out = String::from("start_date,lead,point,x,y\n");
    for r in rows {
        for (k, p) in r.ellipse.polygon(POLYGON_POINTS).iter().enumerate() {
            let _ = writeln!(out, "{start},{},{k},{},{}", r.lead, p[0], p[1]);
        }
    }
    out
}

/// Forecasts `tau_max` leads from `start`, the first predicted day.
pub fn forecast(cfg: &RunConfig, start: NaiveDate) -> Result<ForecastReport, CliError> {
    let (model, table) = load_calibrated(cfg, EXIT_FORECAST)?;
    let series = load_series(&cfg.cache_path).map_err(fail(EXIT_FORECAST))?;
    let lag = model.lag();
    let hist = history(&series, start, lag).ok_or_else(|| {
        CliError::new(
            EXIT_FORECAST,
            format!(
                "insufficient history: {lag} complete days before {start} are required, dataset covers {}..{}",
                series.start().map_or("?".into(), |d| d.to_string()),
                series.end().map_or("?".into(), |d| d.to_string())
            ),
        )
    })?;
    let path =
        forecast_iterative(start, &hist, &model, cfg.split.tau_max).map_err(fail(EXIT_FORECAST))?;
    let path = attach_calibration(path, &table).map_err(fail(EXIT_FORECAST))?;
    let rows = forecast_rows(&path, &series, cfg.confidence).map_err(fail(EXIT_FORECAST))?;

    let forecast_file = cfg.output_dir.join(format!("forecast_{start}.csv"));
    let ellipse_file = cfg.output_dir.join(format!("ellipse_{start}.csv"));
    write_file(&forecast_file, &forecast_csv(start, &rows), EXIT_FORECAST)?;
    write_file(&ellipse_file, &ellipse_csv(start, &rows), EXIT_FORECAST)?;
    Ok(ForecastReport {
        start,
        rows,
        forecast_file,
        ellipse_file,
    })
}

fn forecast_rows(
    path: &ForecastPath,
    series: &RmmSeries,
    confidence: f64,
) -> mjo_gp::Result<Vec<ForecastRow>> {
    let covs = path.cov_path.as_deref().expect("calibrated path");
    path.mu_path
        .iter()
        .zip(covs)
        .enumerate()
        .map(|(i, (mu, cov))| {
            let valid_date = path.start_date + days(i);
            Ok(ForecastRow {
                lead: i + 1,
                valid_date,
                mu: *mu,
                cov: *cov,
                ellipse: confidence_region(Vector2::new(mu[0], mu[1]), cov, confidence)?,
                obs: series.get(valid_date).and_then(|r| r.pair()),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub report: SkillReport,
    pub starts: Vec<NaiveDate>,
    pub skill_file: PathBuf,
    pub hss_file: PathBuf,
}

impl EvaluateReport {
    /// First lead whose correlation falls below `threshold`.
    pub fn first_cor_below(&self, threshold: f64) -> Option<usize> {
        self.report
            .leads
            .iter()
            .find(|l| l.cor < threshold)
            .map(|l| l.lead)
    }

    pub fn summary(&self) -> String {
        let horizon = self
            .first_cor_below(0.5)
            .map_or("COR stays at or above 0.5 for all leads".to_string(), |l| {
                format!("COR first below 0.5 at lead {l}")
            });
        format!(
            "{} forecasts from {} to {}; {horizon}\n{}\n{}",
            self.starts.len(),
            self.starts.first().map_or("?".into(), |d| d.to_string()),
            self.starts.last().map_or("?".into(), |d| d.to_string()),
            self.skill_file.display(),
            self.hss_file.display()
        )
    }
}

/// Start dates from `test_start` every `eval_stride` days that have full
/// history and verification inside the test window, up to `n_predictions`.
pub fn evaluation_starts(cfg: &RunConfig, series: &RmmSeries, lag: usize) -> Vec<NaiveDate> {
    let s = &cfg.split;
    let mut out = Vec::new();
    let mut start = s.test_start;
    while out.len() < cfg.n_predictions && start + days(s.tau_max - 1) <= s.test_end {
        let verified = series
            .slice(start, start + days(s.tau_max - 1))
            .is_some_and(|v| v.missing_dates().is_empty());
        if verified && history(series, start, lag).is_some() {
            out.push(start);
        }
        start += days(s.eval_stride);
    }
    out
}

pub fn evaluate(cfg: &RunConfig) -> Result<EvaluateReport, CliError> {
    let s = &cfg.split;
    let (model, table) = load_calibrated(cfg, EXIT_EVALUATE)?;
    if s.tau_max > table.tau_max() {
        return Err(CliError::new(
            EXIT_EVALUATE,
            format!(
                "tau_max {} exceeds the calibrated {} leads",
                s.tau_max,
                table.tau_max()
            ),
        ));
    }
    let series = load_series(&cfg.cache_path).map_err(fail(EXIT_EVALUATE))?;
    let lag = model.lag();
    let starts = evaluation_starts(cfg, &series, lag);
    if starts.len() < cfg.n_predictions {
        return Err(CliError::new(
            EXIT_EVALUATE,
            format!(
                "only {} admissible start dates between {} and {} with stride {}; {} required (shortfall {})",
                starts.len(),
                s.test_start,
                s.test_end,
                s.eval_stride,
                cfg.n_predictions,
                cfg.n_predictions - starts.len()
            ),
        ));
    }

    let paths = starts
        .par_iter()
        .map(|&start| {
            let hist = history(&series, start, lag).expect("admissible start");
            forecast_iterative(start, &hist, &model, s.tau_max)
        })
        .collect::<mjo_gp::Result<Vec<_>>>()
        .map_err(fail(EXIT_EVALUATE))?;

    let samples = (0..s.tau_max)
        .map(|i| {
            let obs = paths
                .iter()
                .map(|p| {
                    series
                        .get(p.start_date + days(i))
                        .and_then(|r| r.pair())
                        .expect("verified day")
                })
                .collect();
            let pred = paths.iter().map(|p| p.mu_path[i]).collect();
            PairedSample::new(obs, pred, Some(vec![table.entries[i]; paths.len()]), i + 1)
        })
        .collect::<mjo_gp::Result<Vec<_>>>()
        .map_err(fail(EXIT_EVALUATE))?;
    let report = SkillReport::compute(&samples, cfg.hss_leads, cfg.alpha, cfg.exact_nll)
        .map_err(fail(EXIT_EVALUATE))?;

    let skill_file = cfg.output_dir.join("skill.csv");
    let hss_file = cfg.output_dir.join("hss.csv");
    write_file(&skill_file, &report.skill_table(), EXIT_EVALUATE)?;
    write_file(&hss_file, &report.hss_grid(), EXIT_EVALUATE)?;
    Ok(EvaluateReport {
        report,
        starts,
        skill_file,
        hss_file,
    })
}
