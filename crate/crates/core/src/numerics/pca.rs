use serde::{Deserialize, Serialize};

use super::linalg::jacobi_eigen;
use crate::error::{Error, Result};
use crate::features::{ColumnKind, FeatureMatrix};

/// Fitted principal axes. `components[i]` is a unit vector over the input
/// columns; rows are ordered by descending explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransformParams {
    pub column_names: Vec<String>,
    pub mean_vector: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaTransformParams {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn score_names(&self) -> Vec<String> {
        (1..=self.k()).map(|i| format!("PC{i}")).collect()
    }
}

/// Top-`k` eigenvectors of the sample covariance (n − 1) of `m`. Each
/// component is signed so its largest-magnitude entry is positive.
pub fn pca_fit(m: &FeatureMatrix, k: usize) -> Result<PcaTransformParams> {
    let p = m.n_cols();
    let n = m.n_rows();
    if k == 0 || k > p {
        return Err(Error::BadK { k, columns: p });
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(format!("PCA needs >= 2 rows, got {n}")));
    }
    let mean: Vec<f64> = (0..p)
        .map(|j| m.values(j).iter().sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| m.values(j).iter().map(|v| v - mean[j]).collect())
        .collect();
    let mut cov = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
            cov[a][b] = s / (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }
    let eig = jacobi_eigen(&cov)?;
    let components = eig
        .vectors
        .into_iter()
        .take(k)
        .map(|mut v| {
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaTransformParams {
        column_names: m.names(),
        mean_vector: mean,
        components,
        explained_variance: eig.values.into_iter().take(k).map(|v| v.max(0.0)).collect(),
    })
}

/// Scores `(X − mean) · componentsᵀ`, one column `PCi` per component.
pub fn pca_transform(params: &PcaTransformParams, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let p = params.mean_vector.len();
    if m.n_cols() != p {
        return Err(Error::DimensionMismatch(format!(
            "PCA fitted on {p} columns, got {}",
            m.n_cols()
        )));
    }
    let mut out = FeatureMatrix::new(m.index().to_vec());
    for (name, comp) in params.score_names().into_iter().zip(&params.components) {
        let mut score = vec![0.0; m.n_rows()];
        for j in 0..p {
            let w = comp[j];
            let mu = params.mean_vector[j];
            for (s, x) in score.iter_mut().zip(m.values(j)) {
                *s += (x - mu) * w;
            }
        }
        out.push(name, ColumnKind::Continuous, score)?;
    }
    Ok(out)
}

/// Map scores back to the input space: `scores · components + mean`.
pub fn pca_inverse(params: &PcaTransformParams, scores: &FeatureMatrix) -> Result<FeatureMatrix> {
    if scores.n_cols() != params.k() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} score columns, got {}",
            params.k(),
            scores.n_cols()
        )));
    }
    let mut out = FeatureMatrix::new(scores.index().to_vec());
    for (j, name) in params.column_names.iter().enumerate() {
        let mut col = vec![params.mean_vector[j]; scores.n_rows()];
        for (c, comp) in params.components.iter().enumerate() {
            let w = comp[j];
            for (o, s) in col.iter_mut().zip(scores.values(c)) {
                *o += s * w;
            }
        }
        out.push(name.clone(), ColumnKind::Continuous, col)?;
    }
    Ok(out)
}
