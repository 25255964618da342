//! Dense linear algebra kernels: least squares and PCA.

mod linalg;
mod ols;
mod pca;

pub use linalg::{jacobi_eigen, lstsq_qr, SymmetricEigen};
pub use ols::{ols_fit, ols_predict, OlsFit};
pub use pca::{pca_fit, pca_inverse, pca_transform, PcaTransformParams};
