//! Classical comparators. Every model is immutable once fitted and scores
//! subjects with a continuous value where higher means more case-like.

pub mod knn;
pub mod lda;
pub mod logistic;
pub mod pca;
pub mod penalized;
pub mod pls;

pub use knn::{fit_knn, knn_score, KnnModel};
pub use lda::{fit_lda, fit_lda_with_ridge, LdaModel};
pub use logistic::{fit_logistic, log_likelihood, log_likelihood_gradient, LogisticModel, Penalty};
pub use pca::{fit_pclr, fit_pclr_grid, pca, PcaBasis, PclrModel};
pub use penalized::{fit_penalized_logistic, fit_penalized_path, fit_penalized_traced, lambda_max, lambda_path, PenalizedFit};
pub use pls::{fit_pls_lda, fit_pls_lda_grid, simpls, PlsBasis, PlsLdaModel};

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::data::mean_sd;

/// Column means of row-major data.
pub(crate) fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let r = rows.first().map_or(0, Vec::len);
    (0..r)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            mean_sd(&col).0
        })
        .collect()
}

/// `n × r` matrix of rows minus `means`.
pub(crate) fn centered(rows: &[Vec<f64>], means: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), means.len(), |i, k| rows[i][k] - means[k])
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
