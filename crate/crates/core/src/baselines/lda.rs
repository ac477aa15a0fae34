//! Linear discriminant analysis with a pooled covariance and an optional
//! ridge stabilizer.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::dot;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Default ridge `ε = scale · trace(Σ) / r`.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub mean_control: Vec<f64>,
    pub mean_case: Vec<f64>,
    /// Pooled within-class covariance, row-major `r × r`, without the ridge.
    pub covariance: Vec<f64>,
    pub ridge: f64,
    pub log_prior_ratio: f64,
    /// `(Σ + εI)⁻¹(μ₁ − μ₀)`.
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl LdaModel {
    /// Log-ratio of case to control posterior; higher means more case-like.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.offset + dot(x, &self.weights)
    }
}

pub fn fit_lda(ds: &Dataset) -> Result<LdaModel> {
    fit_lda_with_ridge(ds, DEFAULT_RIDGE_SCALE)
}

/// `ridge_scale = 0` requests the plain pooled covariance and fails when it
/// is singular.
pub fn fit_lda_with_ridge(ds: &Dataset, ridge_scale: f64) -> Result<LdaModel> {
    lda_rows(&ds.complete_rows()?, ds.labels(), ridge_scale)
}

pub(crate) fn lda_rows(rows: &[Vec<f64>], labels: &[u8], ridge_scale: f64) -> Result<LdaModel> {
    if !(ridge_scale >= 0.0 && ridge_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge scale {ridge_scale} must be ≥ 0")));
    }
    let r = rows.first().map_or(0, Vec::len);
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n0 < 2 || n1 < 2 {
        return Err(Error::InvalidDataset(format!(
            "LDA needs at least 2 subjects per class, got {n0} controls and {n1} cases"
        )));
    }
    let mut means = [DVector::<f64>::zeros(r), DVector::<f64>::zeros(r)];
    for (row, &y) in rows.iter().zip(labels) {
        means[usize::from(y)] += DVector::from_column_slice(row);
    }
    means[0] /= n0 as f64;
    means[1] /= n1 as f64;
    let mut cov = DMatrix::<f64>::zeros(r, r);
    for (row, &y) in rows.iter().zip(labels) {
        let d = DVector::from_column_slice(row) - &means[usize::from(y)];
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= (rows.len() - 2) as f64;
    let trace = cov.trace();
    let ridge = if ridge_scale > 0.0 && trace > 0.0 {
        ridge_scale * trace / r as f64
    } else {
        ridge_scale
    };
    let mut reg = cov.clone();
    for k in 0..r {
        reg[(k, k)] += ridge;
    }
    let chol = reg
        .cholesky()
        .ok_or_else(|| Error::Singular("pooled covariance is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    if diag.min() * diag.min() <= 1e-14 * diag.max() * diag.max() {
        return Err(Error::Singular("pooled covariance is numerically singular".into()));
    }
    let diff = &means[1] - &means[0];
    let w = chol.solve(&diff);
    let log_prior_ratio = (n1 as f64 / n0 as f64).ln();
    let mid = (&means[1] + &means[0]) * 0.5;
    let offset = log_prior_ratio - mid.dot(&w);
    Ok(LdaModel {
        mean_control: means[0].iter().copied().collect(),
        mean_case: means[1].iter().copied().collect(),
        covariance: cov.transpose().iter().copied().collect(),
        ridge,
        log_prior_ratio,
        weights: w.iter().copied().collect(),
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn shifted(n_each: usize, shift: &[f64], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for y in [0u8, 1] {
            for _ in 0..n_each {
                rows.push(shift.iter().map(|s| f64::from(y) * s + rng.sample::<f64, _>(StandardNormal)).collect());
                labels.push(y);
            }
        }
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn symmetric_classes_split_at_the_origin() {
        // Four points per class forming a square around ±μ, so Σ ∝ I.
        let mu = [1.0, 2.0];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (y, s) in [(1u8, 1.0), (0u8, -1.0)] {
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                rows.push(vec![s * mu[0] + dx, s * mu[1] + dy]);
                labels.push(y);
            }
        }
        let m = fit_lda_with_ridge(&Dataset::from_rows(&rows, labels).unwrap(), 0.0).unwrap();
        assert_abs_diff_eq!(m.score(&[0.0, 0.0]), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.score(&[2.0, -1.0]), 0.0, epsilon = 1e-12);
        assert!(m.score(&mu) > 0.0);
    }

    #[test]
    fn well_separated_gaussians() {
        let shift = [6.0 / 2f64.sqrt(), 6.0 / 2f64.sqrt()];
        let train = fit_lda(&shifted(1000, &shift, 1)).unwrap();
        let valid = shifted(1000, &shift, 2);
        let scores: Vec<f64> = valid.rows().map(|x| train.score(x)).collect();
        assert!(auc(&scores, valid.labels()).unwrap() > 0.999);
    }

    #[test]
    fn score_is_affine() {
        let m = fit_lda(&shifted(50, &[0.5, -0.3, 1.0], 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let d: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let at = |t: f64| m.score(&x.iter().zip(&d).map(|(a, b)| a + t * b).collect::<Vec<_>>());
            assert_abs_diff_eq!(at(2.0) - at(1.0), at(1.0) - at(0.0), epsilon = 1e-8);
        }
    }

    #[test]
    fn doubling_features_keeps_ranking() {
        let ds = shifted(40, &[0.5, 0.2, -0.4], 4);
        let doubled = Dataset::from_rows(
            &ds.rows().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect::<Vec<_>>(),
            ds.labels().to_vec(),
        )
        .unwrap();
        let a = fit_lda(&ds).unwrap();
        let b = fit_lda(&doubled).unwrap();
        for (r1, r2) in ds.rows().zip(doubled.rows()) {
            assert_abs_diff_eq!(a.score(r1), b.score(r2), epsilon = 1e-8);
        }
    }

    #[test]
    fn singular_covariance_without_ridge_fails() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        assert!(matches!(fit_lda_with_ridge(&ds, 0.0), Err(Error::Singular(_))));
        assert!(fit_lda(&ds).is_ok());
    }
}
