use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Natural cubic spline through `(xs[i], ys[i])`.
///
/// Stores second derivatives at the knots; `S''` vanishes at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub const MIN_KNOTS: usize = 4;

    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::Fit(format!("{} knots but {} values", n, ys.len())));
        }
        if n < Self::MIN_KNOTS {
            return Err(Error::Fit(format!(
                "{n} knots supplied, at least {} required",
                Self::MIN_KNOTS
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Fit("non-finite knot".into()));
        }
        if let Some(i) = (1..n).find(|&i| xs[i] <= xs[i - 1]) {
            return Err(Error::Fit(format!(
                "knots not strictly increasing at index {i}"
            )));
        }

        // Tridiagonal system for interior second derivatives, solved by the
        // Thomas algorithm.
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let interior = n - 2;
        let mut diag = vec![0.0; interior];
        let mut upper = vec![0.0; interior];
        let mut rhs = vec![0.0; interior];
        for k in 0..interior {
            let i = k + 1;
            diag[k] = 2.0 * (h[i - 1] + h[i]);
            upper[k] = h[i];
            rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        for k in 1..interior {
            let w = h[k] / diag[k - 1];
            diag[k] -= w * upper[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        let mut m = vec![0.0; n];
        for k in (0..interior).rev() {
            let next = if k + 1 < interior { m[k + 2] } else { 0.0 };
            m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
        }
        Ok(Self { xs, ys, m })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Evaluates the spline; knot abscissae return the knot value exactly.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let i = match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return Some(self.ys[i]),
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        Some(
            a * self.ys[i]
                + b * self.ys[i + 1]
                + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0,
        )
    }
}
