//! Principal component analysis and logistic regression on principal
//! component scores.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic_rows, sigmoid, LogisticModel};
use super::{centered, column_means, dot};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Eigen-decomposition of the sample covariance (n − 1). `components[l]` is
/// the unit eigenvector for `eigenvalues[l]`; eigenvalues are nonincreasing
/// and clamped at 0. Each eigenvector's largest-magnitude entry is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub means: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

impl PcaBasis {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Percentage of total variance carried by the first `s` components.
    pub fn explained_variance_pct(&self, s: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 100.0;
        }
        100.0 * self.eigenvalues.iter().take(s).sum::<f64>() / total
    }

    /// Scores of `x` on the first `s` components.
    pub fn project(&self, x: &[f64], s: usize) -> Vec<f64> {
        let c: Vec<f64> = x.iter().zip(&self.means).map(|(v, m)| v - m).collect();
        self.components.iter().take(s).map(|v| dot(v, &c)).collect()
    }

    /// Maps component scores back to the feature space.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut x = self.means.clone();
        for (z, v) in scores.iter().zip(&self.components) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += z * vi;
            }
        }
        x
    }
}

pub fn pca(ds: &Dataset) -> Result<PcaBasis> {
    Ok(pca_rows(&ds.complete_rows()?))
}

pub(crate) fn pca_rows(rows: &[Vec<f64>]) -> PcaBasis {
    let means = column_means(rows);
    let x = centered(rows, &means);
    let cov = x.tr_mul(&x) / (rows.len() as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&l| eig.eigenvalues[l].max(0.0)).collect();
    let components = order
        .iter()
        .map(|&l| {
            let mut v: Vec<f64> = eig.eigenvectors.column(l).iter().copied().collect();
            let lead = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            v
        })
        .collect();
    PcaBasis {
        means,
        eigenvalues,
        components,
    }
}

/// Logistic regression on the first `s` principal component scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PclrModel {
    pub basis: PcaBasis,
    pub components: usize,
    pub logistic: LogisticModel,
}

impl PclrModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.logistic.linear_predictor(&self.basis.project(x, self.components))
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }
}

pub fn fit_pclr(ds: &Dataset, s: usize) -> Result<PclrModel> {
    fit_pclr_grid(ds, &[s]).map(|mut v| v.remove(0))
}

/// One PCLR fit per component count, sharing a single decomposition.
pub fn fit_pclr_grid(ds: &Dataset, counts: &[usize]) -> Result<Vec<PclrModel>> {
    ds.require_both_classes()?;
    let r = ds.n_biomarkers();
    if let Some(&s) = counts.iter().find(|&&s| s == 0 || s > r) {
        return Err(Error::InvalidParameter(format!("component count {s} outside 1..={r}")));
    }
    let rows = ds.complete_rows()?;
    let basis = pca_rows(&rows);
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    let max_s = counts.iter().copied().max().unwrap_or(0);
    let scores: Vec<Vec<f64>> = rows.iter().map(|row| basis.project(row, max_s)).collect();
    Ok(counts
        .iter()
        .map(|&s| {
            let z: Vec<Vec<f64>> = scores.iter().map(|sc| sc[..s].to_vec()).collect();
            PclrModel {
                basis: basis.clone(),
                components: s,
                logistic: fit_logistic_rows(&z, &y),
            }
        })
        .collect())
}
