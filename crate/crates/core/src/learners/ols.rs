//! Ordinary least squares with coefficient t-tests.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// `1 - SSE/SST`, or `1.0` when the targets are constant.
    pub r_squared: f64,
    pub sse: f64,
    pub rank: usize,
    /// Two-sided p-values of the coefficient t-tests. `None` when the
    /// residual degrees of freedom are zero.
    pub p_values: Option<Vec<f64>>,
}

/// Least-squares fit of `targets` on the design `rows`.
///
/// Rank-deficient designs get the minimum-norm solution.
pub fn fit_ols(rows: &[Vec<f64>], targets: &[f64]) -> Result<OlsFit> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch(rows.len(), targets.len()));
    }
    let p = rows[0].len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidParameter("ragged or empty design rows".into()));
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(targets);
    fit_matrix(&x, &y)
}

pub(crate) fn fit_matrix(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = (n.max(p) as f64) * s_max * f64::EPSILON;
    let beta = svd
        .solve(y, tol)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let fitted = x * &beta;
    let sse: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst == 0.0 {
        1.0
    } else {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    };

    let dof = n.saturating_sub(rank);
    let p_values = if dof == 0 {
        None
    } else {
        let sigma2 = sse / dof as f64;
        let v_t = svd.v_t.as_ref().expect("v_t computed");
        let t_dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof");
        let pv = (0..p)
            .map(|j| {
                // diag of (X'X)^+ = sum_k V[j,k]^2 / s_k^2 over the retained singular values
                let var_factor: f64 = svd
                    .singular_values
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s > tol)
                    .map(|(k, &s)| v_t[(k, j)].powi(2) / (s * s))
                    .sum();
                let se = (sigma2 * var_factor).sqrt();
                let b = beta[j];
                if se == 0.0 {
                    if b == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let t = (b / se).abs();
                    2.0 * (1.0 - t_dist.cdf(t))
                }
            })
            .collect();
        Some(pv)
    };

    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        r_squared,
        sse,
        rank,
        p_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![1.0, x]).collect()
    }

    #[test]
    fn exact_line() {
        let fit = fit_ols(&design(&[0.0, 0.5, 1.0]), &[0.0, 1.0, 2.0]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn constant_targets() {
        let fit = fit_ols(&design(&[0.0, 0.5, 1.0]), &[7.0, 7.0, 7.0]).unwrap();
        assert!((fit.coefficients[0] - 7.0).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn normal_equations_oracle() {
        // X'X = [[3, 1.5], [1.5, 1.25]], X'y = [2, 1.5]  =>  b = (1/6, 1)
        let fit = fit_ols(&design(&[0.0, 0.5, 1.0]), &[0.0, 1.0, 1.0]).unwrap();
        assert!((fit.coefficients[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        // SSE = 1/6, SST = 2/3
        assert!((fit.r_squared - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_minimum_norm() {
        let rows: Vec<_> = [0.0, 1.0, 2.0].iter().map(|&x| vec![x, x]).collect();
        let fit = fit_ols(&rows, &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(fit.rank, 1);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_values_flag_irrelevant_column() {
        // y depends on x only; z is deterministic pseudo-noise
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let x = i as f64 / 39.0;
                let z = ((i * 7919) % 13) as f64 / 13.0;
                vec![1.0, x, z]
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| 1.0 + 3.0 * r[1] + 0.01 * (((i * 31) % 7) as f64 - 3.0))
            .collect();
        let fit = fit_ols(&rows, &y).unwrap();
        let p = fit.p_values.unwrap();
        assert!(p[1] < 1e-10);
        assert!(p[2] > 0.05, "p = {p:?}");
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_ols(&[], &[]), Err(Error::EmptyInput)));
        assert!(fit_ols(&design(&[1.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn saturated_fit_has_no_p_values() {
        let fit = fit_ols(&design(&[0.0, 1.0]), &[3.0, 5.0]).unwrap();
        assert!(fit.p_values.is_none());
    }
}
