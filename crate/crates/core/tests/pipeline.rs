mod common;

use chrono::{Duration, NaiveDate};
use common::rotating_var;
use mjo_gp::data::RmmSeries;
use mjo_gp::emp_cov::EmpiricalGpModel;
use mjo_gp::forecast::{
    attach_calibration, calibrate_covariance, confidence_region, forecast_iterative,
};
use mjo_gp::metrics::{PairedSample, SkillReport};
use nalgebra::Vector2;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(1979, 1, 1).unwrap()
}

#[test]
fn one_step_68_percent_region_coverage() {
    let z = rotating_var(30_000, 0.97, 45.0, 0.35, 2024);
    let series = RmmSeries::from_pairs(start(), &z);
    let lag = 10;
    let model = EmpiricalGpModel::fit(&series.slice_index(0..20_000), lag, 20).unwrap();
    let k = *model.step_covariance();
    let trials = 4000;
    let mut hits = 0;
    for i in 0..trials {
        let t0 = 20_000 + 2 * i;
        let path = forecast_iterative(start(), &z[t0..t0 + lag], &model, 1).unwrap();
        let mu = path.mu_path[0];
        let e = confidence_region(Vector2::new(mu[0], mu[1]), &k, 0.68).unwrap();
        if e.contains(z[t0 + lag]) {
            hits += 1;
        }
    }
    let coverage = hits as f64 / trials as f64;
    assert!((0.65..=0.71).contains(&coverage), "coverage {coverage}");
}

#[test]
fn calibrated_rollout_on_synthetic_oscillation() {
    let z = rotating_var(12_000, 0.97, 45.0, 0.35, 99);
    let series = RmmSeries::from_pairs(start(), &z);
    let lag = 40;
    let model = EmpiricalGpModel::fit(&series.slice_index(0..6000), lag, 60).unwrap();
    let table = calibrate_covariance(&model, &series.slice_index(6000..9000), 30, 500).unwrap();
    let k = model.step_covariance();
    let rho = k[(0, 1)] / (k[(0, 0)] * k[(1, 1)]).sqrt();
    for e in &table.entries {
        assert!(e[(0, 0)] >= k[(0, 0)] && e[(1, 1)] >= k[(1, 1)]);
        let r = e[(0, 1)] / (e[(0, 0)] * e[(1, 1)]).sqrt();
        assert!((r - rho).abs() < 1e-12);
    }
    // Error grows with lead for a damped process.
    assert!(table.bias2[29][0] > table.bias2[0][0]);

    let tau = 30;
    let mut obs = vec![Vec::new(); tau];
    let mut pred = vec![Vec::new(); tau];
    let mut cov = vec![Vec::new(); tau];
    for i in 0..100 {
        let t0 = 9000 + 8 * i;
        let day = start() + Duration::days((t0 + lag) as i64);
        let path = attach_calibration(
            forecast_iterative(day, &z[t0..t0 + lag], &model, tau).unwrap(),
            &table,
        )
        .unwrap();
        let covs = path.cov_path.as_ref().unwrap();
        for l in 0..tau {
            obs[l].push(z[t0 + lag + l]);
            pred[l].push(path.mu_path[l]);
            cov[l].push(covs[l]);
        }
    }
    let samples: Vec<PairedSample> = (0..tau)
        .map(|l| {
            PairedSample::new(obs[l].clone(), pred[l].clone(), Some(cov[l].clone()), l + 1).unwrap()
        })
        .collect();
    let report = SkillReport::compute(&samples, 20, 0.05, false).unwrap();
    assert!(report.leads[0].cor > 0.9);
    assert!(report.leads[0].rmse < report.leads[tau - 1].rmse);
    assert!(report.leads[tau - 1].amplitude_error < 0.0);
    assert!(report
        .leads
        .iter()
        .all(|l| l.crps.is_some() && l.log_score.is_some()));
}
