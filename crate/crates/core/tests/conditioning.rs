mod common;

use chrono::NaiveDate;
use common::{direct_correlations, rotating_var, solve_dense, DirectCorrelations};
use mjo_gp::data::RmmSeries;
use mjo_gp::emp_cov::{CorrelationTable, EmpiricalGpModel, Moments};
use mjo_gp::forecast::{posterior_step, window_from_pairs};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table_from(d: &DirectCorrelations, n: usize) -> (Moments, CorrelationTable) {
    let max_lag = d.auto[0].len() - 1;
    (
        Moments {
            mean: d.mean,
            var: d.var,
        },
        CorrelationTable {
            max_lag,
            r11: d.auto[0].clone(),
            r22: d.auto[1].clone(),
            r12: d.cross.clone(),
            sample_size: n,
        },
    )
}

/// Conditional mean and covariance of day `L + 1` given days `1..=L`, from
/// the full joint covariance of the `2(L + 1)` variables.
fn dense_posterior(
    d: &DirectCorrelations,
    lag: usize,
    days: &[[f64; 2]],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let sd = [d.var[0].sqrt(), d.var[1].sqrt()];
    let cov =
        |j: usize, s: usize, k: usize, t: usize| sd[j] * sd[k] * d.r(j, k, t as isize - s as isize);
    let vars: Vec<(usize, usize)> = (0..2).flat_map(|j| (0..lag).map(move |s| (j, s))).collect();
    let kxx: Vec<Vec<f64>> = vars
        .iter()
        .map(|&(j, s)| vars.iter().map(|&(k, t)| cov(j, s, k, t)).collect())
        .collect();
    let kxy: Vec<Vec<f64>> = vars
        .iter()
        .map(|&(j, s)| (0..2).map(|k| cov(j, s, k, lag)).collect())
        .collect();
    let resid: Vec<Vec<f64>> = vars
        .iter()
        .map(|&(j, s)| vec![days[s][j] - d.mean[j]])
        .collect();
    let alpha = solve_dense(kxx.clone(), resid);
    let beta = solve_dense(kxx, kxy.clone());
    let mut mu = d.mean;
    let mut k = [[0.0; 2]; 2];
    for a in 0..2 {
        for (i, row) in kxy.iter().enumerate() {
            mu[a] += row[a] * alpha[i][0];
        }
        for b in 0..2 {
            let reduce: f64 = kxy.iter().zip(&beta).map(|(r, c)| r[a] * c[b]).sum();
            k[a][b] = cov(a, lag, b, lag) - reduce;
        }
    }
    (mu, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_matches_dense_conditioning(lag in 1usize..=3, seed in 0u64..10_000, rho in 0.3f64..0.95) {
        let z = rotating_var(400, rho, 30.0, 0.6, seed);
        let d = direct_correlations(&z, 4);
        let (m, t) = table_from(&d, z.len());
        let model = EmpiricalGpModel::from_parts(m, &t, lag).unwrap();
        prop_assume!(model.jitter_used() == 0.0);
        let days = &z[100..100 + lag];
        let post = posterior_step(&window_from_pairs(days), &model).unwrap();
        let (mu, k) = dense_posterior(&d, lag, days);
        for a in 0..2 {
            prop_assert!((post.mu[a] - mu[a]).abs() <= 1e-10, "mu {} {}", post.mu[a], mu[a]);
            for b in 0..2 {
                prop_assert!((post.cov[(a, b)] - k[a][b]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn shifted_mean_shifts_forecast(seed in 0u64..10_000, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let z = rotating_var(400, 0.9, 30.0, 0.6, seed);
        let d = direct_correlations(&z, 4);
        let (m, t) = table_from(&d, z.len());
        let shifted = Moments { mean: [m.mean[0] + c1, m.mean[1] + c2], var: m.var };
        let base = EmpiricalGpModel::from_parts(m, &t, 3).unwrap();
        let moved = EmpiricalGpModel::from_parts(shifted, &t, 3).unwrap();
        let days = &z[50..53];
        let moved_days: Vec<[f64; 2]> = days.iter().map(|p| [p[0] + c1, p[1] + c2]).collect();
        let a = posterior_step(&window_from_pairs(days), &base).unwrap();
        let b = posterior_step(&window_from_pairs(&moved_days), &moved).unwrap();
        prop_assert!((b.mu[0] - a.mu[0] - c1).abs() < 1e-10);
        prop_assert!((b.mu[1] - a.mu[1] - c2).abs() < 1e-10);
        prop_assert_eq!(a.cov, b.cov);
    }
}

#[test]
fn uncorrelated_components_condition_separately() {
    let z = rotating_var(3000, 0.9, 30.0, 0.6, 7);
    let d = direct_correlations(&z, 6);
    let (m, mut t) = table_from(&d, z.len());
    t.r12 = vec![0.0; t.r12.len()];
    let lag = 4;
    let model = EmpiricalGpModel::from_parts(m, &t, lag).unwrap();
    let days = &z[1000..1000 + lag];
    let post = posterior_step(&window_from_pairs(days), &model).unwrap();
    assert!(post.cov[(0, 1)].abs() < 1e-15);

    for j in 0..2 {
        let sd = d.var[j];
        let kxx: Vec<Vec<f64>> = (0..lag)
            .map(|s| (0..lag).map(|u| sd * d.auto[j][s.abs_diff(u)]).collect())
            .collect();
        let kxy: Vec<Vec<f64>> = (0..lag).map(|s| vec![sd * d.auto[j][lag - s]]).collect();
        let resid: Vec<Vec<f64>> = days.iter().map(|p| vec![p[j] - d.mean[j]]).collect();
        let alpha = solve_dense(kxx.clone(), resid);
        let beta = solve_dense(kxx, kxy.clone());
        let mu = d.mean[j]
            + kxy
                .iter()
                .zip(&alpha)
                .map(|(r, a)| r[0] * a[0])
                .sum::<f64>();
        let var = sd - kxy.iter().zip(&beta).map(|(r, b)| r[0] * b[0]).sum::<f64>();
        assert!((post.mu[j] - mu).abs() < 1e-10);
        assert!((post.cov[(j, j)] - var).abs() < 1e-10);
    }
}

#[test]
fn one_step_covariance_is_identical_for_every_window() {
    let z = rotating_var(6000, 0.95, 45.0, 0.4, 11);
    let series = RmmSeries::from_pairs(NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(), &z);
    let model = EmpiricalGpModel::fit(&series, 40, 60).unwrap();
    let reference = *model.step_covariance();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let w = DVector::from_fn(80, |_, _| rng.random_range(-3.0..3.0));
        let post = posterior_step(&w, &model).unwrap();
        assert_eq!(post.cov, reference);
    }
}
