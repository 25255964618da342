use crate::error::{Error, Result};

/// Least squares `min ‖A x − b‖` by Householder QR.
///
/// `cols` holds the columns of `A` (column-major). Returns `Err(k)` with the
/// index of the first column found to be numerically dependent on the ones
/// before it.
pub fn lstsq_qr(mut cols: Vec<Vec<f64>>, mut b: Vec<f64>) -> std::result::Result<Vec<f64>, usize> {
    let p = cols.len();
    let m = b.len();
    // column equilibration: scale every column to unit norm
    let mut scale = vec![1.0; p];
    for (j, c) in cols.iter_mut().enumerate() {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(j);
        }
        scale[j] = norm;
        c.iter_mut().for_each(|v| *v /= norm);
    }
    let tol = (m.max(p) as f64) * f64::EPSILON * 100.0;
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let (head, tail) = cols.split_at_mut(k + 1);
        let v = &mut head[k][k..];
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha <= tol {
            return Err(k);
        }
        let r_kk = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= r_kk;
        let vtv = v.iter().map(|x| x * x).sum::<f64>();
        diag[k] = r_kk;
        if vtv == 0.0 {
            continue;
        }
        let apply = |x: &mut [f64]| {
            let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vtv;
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi -= f * vi;
            }
        };
        for c in tail.iter_mut() {
            apply(&mut c[k..]);
        }
        apply(&mut b[k..]);
    }
    // back substitution on R (upper triangle lives above the diagonal of cols)
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= cols[j][k] * x[j];
        }
        x[k] = s / diag[k];
    }
    for (xj, s) in x.iter_mut().zip(&scale) {
        *xj /= s;
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigen-solver for a dense symmetric `n × n` matrix given
/// row-major.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let total: f64 = m.iter().flatten().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]).then(i.cmp(&j)));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| m[i][i]).collect(),
        vectors: order
            .iter()
            .map(|&i| (0..n).map(|k| v[k][i]).collect())
            .collect(),
    })
}
