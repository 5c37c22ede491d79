#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Damped rotation driven by white noise:
/// `z_{t+1} = rho R(theta) z_t + sigma eps_t`.
pub fn rotating_var(n: usize, rho: f64, period: f64, sigma: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s, c) = (2.0 * std::f64::consts::PI / period).sin_cos();
    let mut z = [0.0f64; 2];
    for _ in 0..500 {
        z = step(z, rho, s, c, sigma, &mut rng);
    }
    (0..n)
        .map(|_| {
            z = step(z, rho, s, c, sigma, &mut rng);
            z
        })
        .collect()
}

fn step(z: [f64; 2], rho: f64, s: f64, c: f64, sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let e1: f64 = StandardNormal.sample(rng);
    let e2: f64 = StandardNormal.sample(rng);
    [
        rho * (c * z[0] - s * z[1]) + sigma * e1,
        rho * (s * z[0] + c * z[1]) + sigma * e2,
    ]
}

/// Biased lagged correlations by direct summation; `cross[h + max_lag]` is
/// `Corr(z1_t, z2_{t+h})`.
pub struct DirectCorrelations {
    pub mean: [f64; 2],
    pub var: [f64; 2],
    pub auto: [Vec<f64>; 2],
    pub cross: Vec<f64>,
}

pub fn direct_correlations(z: &[[f64; 2]], max_lag: usize) -> DirectCorrelations {
    let n = z.len() as f64;
    let mean = [0, 1].map(|j| z.iter().map(|p| p[j]).sum::<f64>() / n);
    let var = [0, 1].map(|j| z.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n);
    let lagged = |j: usize, k: usize, h: isize| -> f64 {
        let mut acc = 0.0;
        for t in 0..z.len() as isize {
            let u = t + h;
            if u < 0 || u >= z.len() as isize {
                continue;
            }
            acc += (z[t as usize][j] - mean[j]) * (z[u as usize][k] - mean[k]);
        }
        acc / n / (var[j] * var[k]).sqrt()
    };
    let h = max_lag as isize;
    DirectCorrelations {
        mean,
        var,
        auto: [0, 1].map(|j| (0..=h).map(|l| lagged(j, j, l)).collect()),
        cross: (-h..=h).map(|l| lagged(0, 1, l)).collect(),
    }
}

impl DirectCorrelations {
    /// Correlation between component `j` at time `s` and `k` at time `s + h`.
    pub fn r(&self, j: usize, k: usize, h: isize) -> f64 {
        let max_lag = self.auto[0].len() as isize - 1;
        match (j, k) {
            (0, 0) | (1, 1) => self.auto[j][h.unsigned_abs()],
            (0, 1) => self.cross[(h + max_lag) as usize],
            _ => self.cross[(-h + max_lag) as usize],
        }
    }
}

/// Solves `a x = b` by Gauss-Jordan elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                a[row][c] -= f * a[col][c];
            }
            for c in 0..b[row].len() {
                b[row][c] -= f * b[col][c];
            }
        }
    }
    for row in 0..n {
        let d = a[row][row];
        for v in &mut b[row] {
            *v /= d;
        }
    }
    b
}
