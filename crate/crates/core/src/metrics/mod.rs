//! Verification scores for bivariate index forecasts.

mod fisher;
mod report;

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::Matrix2;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub use fisher::{fisher_exact, FisherResult, DEFAULT_ALPHA};
pub use report::{HssCell, LeadSkill, SkillReport, DEFAULT_HSS_LEADS, HSS_CATEGORIES};

/// Observations and forecasts at one lead, aligned by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub obs: Vec<[f64; 2]>,
    pub pred: Vec<[f64; 2]>,
    pub cov: Option<Vec<Matrix2<f64>>>,
    pub lead: usize,
}

impl PairedSample {
    pub fn new(
        obs: Vec<[f64; 2]>,
        pred: Vec<[f64; 2]>,
        cov: Option<Vec<Matrix2<f64>>>,
        lead: usize,
    ) -> Result<Self> {
        if obs.len() != pred.len() {
            return Err(Error::Score(format!(
                "{} observations but {} predictions",
                obs.len(),
                pred.len()
            )));
        }
        if let Some(c) = &cov {
            if c.len() != obs.len() {
                return Err(Error::Score(format!(
                    "{} covariances for {} pairs",
                    c.len(),
                    obs.len()
                )));
            }
        }
        Ok(Self {
            obs,
            pred,
            cov,
            lead,
        })
    }

    pub fn n_p(&self) -> usize {
        self.obs.len()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.obs.is_empty() {
            return Err(Error::Score("empty sample".into()));
        }
        Ok(())
    }

    fn covariances(&self) -> Result<&[Matrix2<f64>]> {
        self.cov
            .as_deref()
            .ok_or_else(|| Error::Score("probabilistic score needs forecast covariances".into()))
    }
}

/// Uncentered bivariate correlation.
pub fn cor(s: &PairedSample) -> Result<f64> {
    s.require_nonempty()?;
    let (mut num, mut oo, mut pp) = (0.0, 0.0, 0.0);
    for (o, p) in s.obs.iter().zip(&s.pred) {
        num += o[0] * p[0] + o[1] * p[1];
        oo += o[0] * o[0] + o[1] * o[1];
        pp += p[0] * p[0] + p[1] * p[1];
    }
    if oo == 0.0 || pp == 0.0 {
        return Err(Error::Score(
            "correlation undefined for an all-zero series".into(),
        ));
    }
    Ok((num / (oo.sqrt() * pp.sqrt())).clamp(-1.0, 1.0))
}

pub fn rmse(s: &PairedSample) -> Result<f64> {
    s.require_nonempty()?;
    let sum: f64 = s
        .obs
        .iter()
        .zip(&s.pred)
        .map(|(o, p)| (o[0] - p[0]).powi(2) + (o[1] - p[1]).powi(2))
        .sum();
    Ok((sum / s.n_p() as f64).sqrt())
}

/// Signed angle from `obs` to `pred` in degrees, in `(-180, 180]`.
pub fn signed_angle_deg(obs: [f64; 2], pred: [f64; 2]) -> f64 {
    let cross = obs[0] * pred[1] - obs[1] * pred[0];
    let dot = obs[0] * pred[0] + obs[1] * pred[1];
    let a = cross.atan2(dot).to_degrees();
    if a <= -180.0 {
        a + 360.0
    } else {
        a
    }
}

/// Mean signed angle from observed to predicted vector, degrees.
pub fn phase_error(s: &PairedSample) -> Result<f64> {
    s.require_nonempty()?;
    let mut sum = 0.0;
    for (t, (o, p)) in s.obs.iter().zip(&s.pred).enumerate() {
        if *o == [0.0, 0.0] || *p == [0.0, 0.0] {
            return Err(Error::Score(format!(
                "phase undefined at index {t}: vector at the origin"
            )));
        }
        sum += signed_angle_deg(*o, *p);
    }
    Ok(sum / s.n_p() as f64)
}

/// Mean of predicted minus observed amplitude.
pub fn amplitude_error(s: &PairedSample) -> Result<f64> {
    s.require_nonempty()?;
    let sum: f64 = s
        .obs
        .iter()
        .zip(&s.pred)
        .map(|(o, p)| p[0].hypot(p[1]) - o[0].hypot(o[1]))
        .sum();
    Ok(sum / s.n_p() as f64)
}

/// 0 for amplitude below 1, else the 45-degree sector `i` with
/// `angle in (-pi + (i-1) pi/4, -pi + i pi/4]`. An angle of exactly `-pi` is
/// the same direction as `pi` and falls in sector 8.
pub fn phase_category(z1: f64, z2: f64) -> u8 {
    if z1.hypot(z2) < 1.0 {
        return 0;
    }
    let angle = z2.atan2(z1);
    (1..=8u8)
        .find(|&i| {
            angle > -PI + f64::from(i - 1) * FRAC_PI_4 && angle <= -PI + f64::from(i) * FRAC_PI_4
        })
        .unwrap_or(8)
}

/// Hit, false alarm, miss and correct rejection counts for one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

pub fn contingency(s: &PairedSample, category: u8) -> ContingencyTable {
    let mut t = ContingencyTable {
        a: 0,
        b: 0,
        c: 0,
        d: 0,
    };
    for (o, p) in s.obs.iter().zip(&s.pred) {
        let in_obs = phase_category(o[0], o[1]) == category;
        let in_pred = phase_category(p[0], p[1]) == category;
        match (in_pred, in_obs) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    t
}

/// Heidke skill score; `None` when the denominator vanishes.
pub fn hss(t: &ContingencyTable) -> Option<f64> {
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        None
    } else {
        Some(2.0 * (a * d - b * c) / den)
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Closed-form CRPS of `N(mu, sigma^2)` against observation `y`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Score(format!("CRPS needs sigma > 0, got {sigma}")));
    }
    let w = (y - mu) / sigma;
    Ok(sigma * (w * (2.0 * std_normal_cdf(w) - 1.0) + 2.0 * std_normal_pdf(w) - 1.0 / PI.sqrt()))
}

/// Mean over the sample of the summed per-component CRPS, with marginal
/// standard deviations from the forecast covariances.
pub fn crps_bivariate(s: &PairedSample) -> Result<f64> {
    s.require_nonempty()?;
    let cov = s.covariances()?;
    let mut sum = 0.0;
    for ((o, p), k) in s.obs.iter().zip(&s.pred).zip(cov) {
        sum += crps_gaussian(p[0], k[(0, 0)].sqrt(), o[0])?
            + crps_gaussian(p[1], k[(1, 1)].sqrt(), o[1])?;
    }
    Ok(sum / s.n_p() as f64)
}

/// Mean Gaussian negative log-likelihood.
///
/// With `exact_nll` false the constant term is `0.5 ln(2 pi)`; with it true
/// the bivariate normalizer `ln(2 pi)` is used.
pub fn log_score(s: &PairedSample, exact_nll: bool) -> Result<f64> {
    s.require_nonempty()?;
    let cov = s.covariances()?;
    let constant = if exact_nll { 2.0 } else { 1.0 } * (2.0 * PI).ln();
    let mut sum = 0.0;
    for (t, ((o, p), k)) in s.obs.iter().zip(&s.pred).zip(cov).enumerate() {
        let chol = k.cholesky().ok_or_else(|| {
            Error::Score(format!(
                "forecast covariance at index {t} is not positive definite"
            ))
        })?;
        let l = chol.l();
        let log_det = 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln());
        let r = nalgebra::Vector2::new(o[0] - p[0], o[1] - p[1]);
        let quad = r.dot(&chol.solve(&r));
        sum += 0.5 * (constant + log_det + quad);
    }
    Ok(sum / s.n_p() as f64)
}
