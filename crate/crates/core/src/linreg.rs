//! Least-squares tenure regression and the lead-time calculation.
//!
//! The fit minimizes `sum (y - b0 - x.b)^2 + ridge_eps * |b|^2` with the
//! intercept unpenalized. Centering removes the intercept; the centered
//! problem is solved through the SVD of the centered design matrix, which
//! stays stable when one-hot blocks make the design rank deficient.

use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("expected {expected} inputs, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ridge_eps must be finite and non-negative, got {0}")]
    BadRidge(f64),
    #[error("singular value decomposition did not converge")]
    Factorization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub feature_names: Vec<String>,
    /// Position of each used feature in the input vector.
    pub columns: Vec<usize>,
    /// Length of the input vectors the model accepts.
    pub input_dim: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Training means of the used features; the reference point for per-term
    /// attributions.
    pub feature_means: Vec<f64>,
    pub rmse: f64,
    /// 0 by convention when the training target has zero variance.
    pub r_squared: f64,
    pub n_train: usize,
}

/// Fits on every column of `x`.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64], ridge_eps: f64) -> Result<RegressionModel, RegressionError> {
    let p = x.first().map_or(0, Vec::len);
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let columns: Vec<usize> = (0..p).collect();
    fit_ols_columns(x, y, ridge_eps, &columns, &names)
}

/// Fits on the subset `columns` of each row of `x`, naming them `names`.
pub fn fit_ols_columns(
    x: &[Vec<f64>],
    y: &[f64],
    ridge_eps: f64,
    columns: &[usize],
    names: &[String],
) -> Result<RegressionModel, RegressionError> {
    let n = x.len();
    if n < 2 {
        return Err(RegressionError::TooFewRows(n));
    }
    if y.len() != n {
        return Err(RegressionError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if !(ridge_eps.is_finite() && ridge_eps >= 0.0) {
        return Err(RegressionError::BadRidge(ridge_eps));
    }
    let input_dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != input_dim) {
        return Err(RegressionError::DimensionMismatch {
            expected: input_dim,
            found: row.len(),
        });
    }
    if let Some(&c) = columns.iter().find(|&&c| c >= input_dim) {
        return Err(RegressionError::DimensionMismatch {
            expected: input_dim,
            found: c + 1,
        });
    }
    assert_eq!(columns.len(), names.len(), "one name per column");
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFinite("target"));
    }

    let p = columns.len();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let means: Vec<f64> = columns
        .iter()
        .map(|&c| x.iter().map(|r| r[c]).sum::<f64>() / nf)
        .collect();

    let coefficients = if p == 0 {
        Vec::new()
    } else {
        let xc = Mat::from_fn(n, p, |i, j| x[i][columns[j]] - means[j]);
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        solve_centered_ridge(&xc, &yc, ridge_eps)?
    };
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(b, m)| b * m)
            .sum::<f64>();

    let mut model = RegressionModel {
        feature_names: names.to_vec(),
        columns: columns.to_vec(),
        input_dim,
        coefficients,
        intercept,
        feature_means: means,
        rmse: 0.0,
        r_squared: 0.0,
        n_train: n,
    };
    let fitted: Vec<f64> = x.iter().map(|r| model.linear_form(r)).collect();
    let (rmse, r_squared) = fit_quality(&fitted, y);
    model.rmse = rmse;
    model.r_squared = r_squared;
    Ok(model)
}

/// `b = V diag(s / (s^2 + eps)) U^T y`. Singular values below the usual
/// rank tolerance are treated as exact zeros.
fn solve_centered_ridge(xc: &Mat<f64>, yc: &[f64], eps: f64) -> Result<Vec<f64>, RegressionError> {
    let (n, p) = (xc.nrows(), xc.ncols());
    let svd = xc.thin_svd().map_err(|_| RegressionError::Factorization)?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let rank_cap = s.nrows();
    let s_max = (0..rank_cap).map(|k| s[k]).fold(0.0, f64::max);
    let tol = s_max * f64::EPSILON * n.max(p) as f64;

    let mut beta = vec![0.0; p];
    for k in 0..rank_cap {
        let sk = s[k];
        if sk <= tol {
            continue;
        }
        let uty: f64 = (0..n).map(|i| u[(i, k)] * yc[i]).sum();
        let w = sk / (sk * sk + eps) * uty;
        for (j, b) in beta.iter_mut().enumerate() {
            *b += v[(j, k)] * w;
        }
    }
    Ok(beta)
}

/// (rmse, r_squared) of predictions against observations.
pub fn fit_quality(predicted: &[f64], observed: &[f64]) -> (f64, f64) {
    let n = observed.len() as f64;
    if observed.is_empty() {
        return (0.0, 0.0);
    }
    let mean = observed.iter().sum::<f64>() / n;
    let ss_res: f64 = predicted
        .iter()
        .zip(observed)
        .map(|(p, o)| (o - p) * (o - p))
        .sum();
    let ss_tot: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    ((ss_res / n).sqrt(), r2)
}

impl RegressionModel {
    fn linear_form(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .columns
                .iter()
                .zip(&self.coefficients)
                .map(|(&c, b)| b * x[c])
                .sum::<f64>()
    }

    pub fn check_dimension(&self, x: &[f64]) -> Result<(), RegressionError> {
        if x.len() != self.input_dim {
            return Err(RegressionError::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Predicted total tenure, unclamped.
pub fn predict_ttl(model: &RegressionModel, x: &[f64]) -> Result<f64, RegressionError> {
    model.check_dimension(x)?;
    Ok(model.linear_form(x))
}

/// Tenure outcome for one employee. All values in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenurePrediction {
    /// Predicted total tenure length.
    pub ttl: f64,
    /// Tenure served so far.
    pub current_tenure: f64,
    /// `ttl - current_tenure`; negative when the prediction is already past.
    pub lead_time_raw: f64,
    /// `max(0, lead_time_raw)`.
    pub lead_time: f64,
    pub overdue: bool,
}

pub fn lead_time(ttl: f64, current_tenure: f64) -> TenurePrediction {
    let raw = ttl - current_tenure;
    TenurePrediction {
        ttl,
        current_tenure,
        lead_time_raw: raw,
        lead_time: raw.max(0.0),
        overdue: raw < 0.0,
    }
}
