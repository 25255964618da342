use serde::{Deserialize, Serialize};

use super::linalg::lstsq_qr;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Least-squares fit with intercept. `coefficients[0]` is the intercept,
/// `coefficients[j + 1]` belongs to `column_names[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub residual_sum_squares: f64,
    pub n_obs: usize,
    pub ridge: f64,
}

impl OlsFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.column_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j + 1])
    }
}

/// Minimize `‖y − β₀ − Xβ‖² + ridge·‖β‖²` by Householder QR. The intercept is
/// never penalized. With `ridge == 0` a rank-deficient design is an error.
pub fn ols_fit(m: &FeatureMatrix, y: &[f64], ridge: f64) -> Result<OlsFit> {
    let n = m.n_rows();
    let p = m.n_cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {} rows, design has {n}",
            y.len()
        )));
    }
    if n < p + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows cannot identify {p} coefficients plus intercept"
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::DimensionMismatch(format!("ridge must be >= 0, got {ridge}")));
    }
    let extra = if ridge > 0.0 { p } else { 0 };
    let rows = n + extra;
    let mut cols = Vec::with_capacity(p + 1);
    let mut ones = vec![1.0; n];
    ones.resize(rows, 0.0);
    cols.push(ones);
    let lambda = ridge.sqrt();
    for j in 0..p {
        let mut c = Vec::with_capacity(rows);
        c.extend_from_slice(m.values(j));
        c.resize(rows, 0.0);
        if extra > 0 {
            c[n + j] = lambda;
        }
        cols.push(c);
    }
    let mut b = y.to_vec();
    b.resize(rows, 0.0);
    let coefficients = lstsq_qr(cols, b).map_err(|k| {
        let name = if k == 0 {
            "(intercept)".to_string()
        } else {
            m.columns()[k - 1].name.clone()
        };
        Error::RankDeficient(name)
    })?;
    let fit = OlsFit {
        coefficients,
        column_names: m.names(),
        residual_sum_squares: 0.0,
        n_obs: n,
        ridge,
    };
    let yhat = predict_unchecked(&fit, m);
    let rss = y.iter().zip(&yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(OlsFit {
        residual_sum_squares: rss,
        ..fit
    })
}

fn predict_unchecked(fit: &OlsFit, m: &FeatureMatrix) -> Vec<f64> {
    let mut out = vec![fit.coefficients[0]; m.n_rows()];
    for j in 0..m.n_cols() {
        let beta = fit.coefficients[j + 1];
        for (o, x) in out.iter_mut().zip(m.values(j)) {
            *o += beta * x;
        }
    }
    out
}

/// `ŷ = β₀ + Xβ`; the matrix must carry exactly the fitted columns in order.
pub fn ols_predict(fit: &OlsFit, m: &FeatureMatrix) -> Result<Vec<f64>> {
    let names = m.names();
    if names != fit.column_names {
        return Err(Error::ColumnMismatch {
            expected: fit.column_names.clone(),
            actual: names,
        });
    }
    Ok(predict_unchecked(fit, m))
}
