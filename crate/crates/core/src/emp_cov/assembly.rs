use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, SymmetricEigen, Vector2};

use super::{CorrelationFunction, Moments, CORRELATION_BOUND_SLACK};
use crate::error::{Error, Result};

/// Jitter multipliers tried in order, as fractions of `trace / dim`.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// Joint prior covariance of a length-`L` window and the following day.
///
/// Rows and columns of `k_xx` are ordered as RMM1 days oldest to newest, then
/// RMM2 days oldest to newest, matching the columns of a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GpBlocks {
    pub lag: usize,
    pub k_xx: DMatrix<f64>,
    pub k_yx: DMatrix<f64>,
    pub k_yy: Matrix2<f64>,
    pub mean_x: DVector<f64>,
    pub mean_y: Vector2<f64>,
}

/// Builds the stationary block covariance from interpolated correlations.
///
/// `Cov(z^j_s, z^k_t) = sqrt(var_j var_k) r_jk(t - s)`. Window position `p`
/// sits `L - p` days before the target day.
pub fn assemble_covariance(
    corr: &CorrelationFunction,
    moments: &Moments,
    lag: usize,
) -> Result<GpBlocks> {
    if lag == 0 {
        return Err(Error::Input("lag must be at least 1".into()));
    }
    if lag > corr.max_lag() {
        return Err(Error::Assembly {
            lag,
            max_lag: corr.max_lag(),
        });
    }
    let sd = [moments.var[0].sqrt(), moments.var[1].sqrt()];
    let cov = |j: usize, k: usize, h: isize| -> Result<f64> {
        let r = corr.eval(j, k, h as f64)?;
        if r.abs() > 1.0 + CORRELATION_BOUND_SLACK {
            return Err(Error::Estimation(format!(
                "interpolated correlation r{}{}({h}) = {r} outside [-1, 1]",
                j + 1,
                k + 1
            )));
        }
        Ok(sd[j] * sd[k] * r)
    };

    let dim = 2 * lag;
    let mut k_xx = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        let (j, p) = (a / lag, a % lag);
        for b in a..dim {
            let (k, q) = (b / lag, b % lag);
            let v = cov(j, k, q as isize - p as isize)?;
            k_xx[(a, b)] = v;
            k_xx[(b, a)] = v;
        }
    }
    let mut k_yx = DMatrix::zeros(2, dim);
    for j in 0..2 {
        for b in 0..dim {
            let (k, q) = (b / lag, b % lag);
            k_yx[(j, b)] = cov(j, k, q as isize - lag as isize)?;
        }
    }
    let off = cov(0, 1, 0)?;
    let k_yy = Matrix2::new(moments.var[0], off, off, moments.var[1]);
    let mean_x = DVector::from_fn(dim, |a, _| moments.mean[a / lag]);
    let mean_y = Vector2::new(moments.mean[0], moments.mean[1]);
    Ok(GpBlocks {
        lag,
        k_xx,
        k_yx,
        k_yy,
        mean_x,
        mean_y,
    })
}

/// Cholesky factor of a (possibly jittered) covariance.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter_used: f64,
}

/// Factors `k`, adding `lambda * trace / dim` to the diagonal for the first
/// multiplier on [`JITTER_LADDER`] that succeeds.
pub fn regularize_factorize(k: &DMatrix<f64>) -> Result<Factorization> {
    let dim = k.nrows();
    if dim == 0 || k.ncols() != dim {
        return Err(Error::Input(format!(
            "covariance must be square and non-empty, got {:?}",
            k.shape()
        )));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("covariance has non-finite entries".into()));
    }
    let scale = k.trace() / dim as f64;
    for lambda in JITTER_LADDER {
        let jitter = lambda * scale;
        let mut m = k.clone();
        for i in 0..dim {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            if lambda > 0.0 {
                log::warn!("covariance required jitter {jitter:e} (lambda {lambda:e}) to factor");
            }
            return Ok(Factorization {
                chol,
                jitter_used: jitter,
            });
        }
    }
    let sym = (k + k.transpose()) * 0.5;
    let min_eigenvalue = SymmetricEigen::new(sym).eigenvalues.min();
    Err(Error::Conditioning { min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emp_cov::{fit_spline, CorrelationTable};

    fn table(r11: Vec<f64>, r22: Vec<f64>, r12: Vec<f64>) -> CorrelationTable {
        CorrelationTable {
            max_lag: r11.len() - 1,
            r11,
            r22,
            r12,
            sample_size: 1000,
        }
    }

    fn unit() -> Moments {
        Moments {
            mean: [0.0, 0.0],
            var: [1.0, 1.0],
        }
    }

    #[test]
    fn two_lag_uncorrelated_components() {
        let auto = vec![1.0, 0.5, 0.25, 0.0];
        let corr = fit_spline(&table(auto.clone(), auto, vec![0.0; 7])).unwrap();
        let b = assemble_covariance(&corr, &unit(), 2).unwrap();
        let expect_xx = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0,
            ],
        );
        assert_eq!(b.k_xx, expect_xx);
        // Chronological window: the oldest day is two days before the target.
        let expect_yx = DMatrix::from_row_slice(2, 4, &[0.25, 0.5, 0.0, 0.0, 0.0, 0.0, 0.25, 0.5]);
        assert_eq!(b.k_yx, expect_yx);
        assert_eq!(b.k_yy, Matrix2::identity());
    }

    #[test]
    fn zero_cross_correlation_gives_zero_cross_blocks() {
        let corr = fit_spline(&table(
            vec![1.0, 0.7, 0.3, 0.1, 0.0],
            vec![1.0, 0.6, 0.2, 0.0, 0.0],
            vec![0.0; 9],
        ))
        .unwrap();
        let b = assemble_covariance(&corr, &unit(), 3).unwrap();
        for a in 0..3 {
            for c in 3..6 {
                assert_eq!(b.k_xx[(a, c)], 0.0);
                assert_eq!(b.k_xx[(c, a)], 0.0);
            }
        }
        assert_eq!(b.k_yx[(0, 4)], 0.0);
        assert_eq!(b.k_yx[(1, 1)], 0.0);
    }

    #[test]
    fn output_covariance_uses_lag_zero_cross_correlation() {
        let mut r12 = vec![0.0; 7];
        r12[3] = 0.3;
        let corr = fit_spline(&table(
            vec![1.0, 0.5, 0.2, 0.1],
            vec![1.0, 0.5, 0.2, 0.1],
            r12,
        ))
        .unwrap();
        let b = assemble_covariance(&corr, &unit(), 1).unwrap();
        assert_eq!(b.k_yy, Matrix2::new(1.0, 0.3, 0.3, 1.0));
    }

    #[test]
    fn lag_beyond_table_is_assembly_error() {
        let corr = fit_spline(&table(
            vec![1.0, 0.5, 0.2, 0.1],
            vec![1.0, 0.5, 0.2, 0.1],
            vec![0.0; 7],
        ))
        .unwrap();
        assert!(matches!(
            assemble_covariance(&corr, &unit(), 4),
            Err(Error::Assembly { lag: 4, max_lag: 3 })
        ));
    }

    #[test]
    fn blocks_are_symmetric_and_toeplitz() {
        let corr = fit_spline(&table(
            vec![1.0, 0.8, 0.5, 0.2, -0.1, -0.2],
            vec![1.0, 0.7, 0.45, 0.15, -0.05, -0.1],
            vec![-0.2, -0.3, -0.25, -0.1, 0.1, 0.2, 0.4, 0.5, 0.3, 0.1, 0.0],
        ))
        .unwrap();
        let m = Moments {
            mean: [0.1, -0.2],
            var: [1.3, 0.7],
        };
        let lag = 5;
        let b = assemble_covariance(&corr, &m, lag).unwrap();
        assert_eq!(b.k_xx, b.k_xx.transpose());
        for bj in 0..2 {
            for bk in 0..2 {
                for p in 0..lag {
                    for q in 0..lag {
                        if p + 1 < lag && q + 1 < lag {
                            assert_eq!(
                                b.k_xx[(bj * lag + p, bk * lag + q)],
                                b.k_xx[(bj * lag + p + 1, bk * lag + q + 1)]
                            );
                        }
                    }
                }
            }
        }
        assert_eq!(b.mean_x[0], 0.1);
        assert_eq!(b.mean_x[lag], -0.2);
    }

    #[test]
    fn identity_needs_no_jitter() {
        let f = regularize_factorize(&DMatrix::identity(6, 6)).unwrap();
        assert_eq!(f.jitter_used, 0.0);
    }

    #[test]
    fn rank_one_needs_jitter() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let k = &v * v.transpose();
        let f = regularize_factorize(&k).unwrap();
        assert!(f.jitter_used > 0.0);
    }

    #[test]
    fn negative_eigenvalue_is_conditioning_error() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        match regularize_factorize(&k) {
            Err(Error::Conditioning { min_eigenvalue }) => {
                assert!((min_eigenvalue + 0.5).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
