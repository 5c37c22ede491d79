use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Vertices used when discretizing an ellipse boundary for plotting.
pub const POLYGON_POINTS: usize = 64;

/// Upper quantile of the chi-square distribution with two degrees of freedom
/// at coverage `prob`: `-2 ln(1 - prob)`.
pub fn chi2_2_quantile(prob: f64) -> f64 {
    -2.0 * (-prob).ln_1p()
}

/// Confidence ellipse of a bivariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Major then minor semi-axis length.
    pub semi_axes: [f64; 2],
    /// Unit directions of the major and minor axes.
    pub axis_dirs: [[f64; 2]; 2],
    /// Eigenvalues of the covariance, major first.
    pub eigenvalues: [f64; 2],
    pub prob: f64,
}

impl Ellipse {
    /// Angle of the major axis from the RMM1 axis, degrees in `(-90, 90]`.
    pub fn orientation_deg(&self) -> f64 {
        let [x, y] = self.axis_dirs[0];
        let mut a = y.atan2(x).to_degrees();
        if a <= -90.0 {
            a += 180.0;
        } else if a > 90.0 {
            a -= 180.0;
        }
        a
    }

    /// Whether `point` lies in the closed ellipse.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        let d = [point[0] - self.center[0], point[1] - self.center[1]];
        let q: f64 = (0..2)
            .map(|i| {
                let along = d[0] * self.axis_dirs[i][0] + d[1] * self.axis_dirs[i][1];
                (along / self.semi_axes[i]).powi(2)
            })
            .sum();
        q <= 1.0
    }

    /// `n` boundary points, counter-clockwise from the positive major axis.
    pub fn polygon(&self, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let (s, c) = t.sin_cos();
                let u = self.semi_axes[0] * c;
                let v = self.semi_axes[1] * s;
                [
                    self.center[0] + u * self.axis_dirs[0][0] + v * self.axis_dirs[1][0],
                    self.center[1] + u * self.axis_dirs[0][1] + v * self.axis_dirs[1][1],
                ]
            })
            .collect()
    }
}

/// Region holding probability `prob` of `N(mu, cov)`.
pub fn confidence_region(mu: Vector2<f64>, cov: &Matrix2<f64>, prob: f64) -> Result<Ellipse> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Input(format!("coverage {prob} must be in (0, 1)")));
    }
    let (a, b, d) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    if ![a, b, d].iter().all(|v| v.is_finite()) {
        return Err(Error::Input("covariance has non-finite entries".into()));
    }
    let mid = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    let major = mid + rad;
    let det = a * d - b * b;
    let minor = if major > 0.0 { det / major } else { mid - rad };
    if !(minor > 0.0 && major > 0.0) {
        return Err(Error::Region(major, minor));
    }
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let k = chi2_2_quantile(prob).sqrt();
    Ok(Ellipse {
        center: [mu[0], mu[1]],
        semi_axes: [k * major.sqrt(), k * minor.sqrt()],
        axis_dirs: [[c, s], [-s, c]],
        eigenvalues: [major, minor],
        prob,
    })
}
