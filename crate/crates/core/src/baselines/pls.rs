//! Partial least squares (SIMPLS) dimension reduction followed by LDA on the
//! latent variables.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::lda::{lda_rows, LdaModel, DEFAULT_RIDGE_SCALE};
use super::{column_means, dot};
use crate::data::Dataset;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// Unit weight vectors `a_l` with latent variables `(x − means)'a_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlsBasis {
    pub means: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    /// Set when fewer directions than requested could be extracted.
    pub rank_exhausted: bool,
}

impl PlsBasis {
    pub fn n_components(&self) -> usize {
        self.directions.len()
    }

    pub fn project(&self, x: &[f64], s: usize) -> Vec<f64> {
        let c: Vec<f64> = x.iter().zip(&self.means).map(|(v, m)| v - m).collect();
        self.directions.iter().take(s).map(|a| dot(a, &c)).collect()
    }

    /// The first `s` directions; the algorithm is sequential so this equals a
    /// fresh fit with `s` components.
    pub fn truncated(&self, s: usize) -> Self {
        Self {
            means: self.means.clone(),
            directions: self.directions.iter().take(s).cloned().collect(),
            rank_exhausted: self.rank_exhausted && s > self.directions.len(),
        }
    }
}

pub fn simpls(ds: &Dataset, s: usize) -> Result<PlsBasis> {
    let rows = ds.complete_rows()?;
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    check_count(s, ds.n_biomarkers(), ds.n_subjects())?;
    Ok(simpls_rows(&rows, &y, s))
}

fn check_count(s: usize, r: usize, n: usize) -> Result<()> {
    let max = r.min(n - 1);
    if s == 0 || s > max {
        return Err(Error::InvalidParameter(format!("component count {s} outside 1..={max}")));
    }
    Ok(())
}

pub(crate) fn simpls_rows(rows: &[Vec<f64>], y: &[f64], s: usize) -> PlsBasis {
    let means = column_means(rows);
    let r = means.len();
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&means).map(|(v, m)| v - m).collect())
        .collect();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    // Cross-covariance X'y of the centered data.
    let mut cross = alloc::vec![0.0; r];
    for (row, &yi) in x.iter().zip(y) {
        for (c, v) in cross.iter_mut().zip(row) {
            *c += v * (yi - ybar);
        }
    }
    let initial = dot(&cross, &cross).sqrt();
    let mut directions = Vec::new();
    let mut loadings: Vec<Vec<f64>> = Vec::new();
    let mut rank_exhausted = false;
    while directions.len() < s {
        let norm = dot(&cross, &cross).sqrt();
        if norm <= RANK_TOL * initial.max(f64::MIN_POSITIVE) || initial == 0.0 {
            rank_exhausted = true;
            break;
        }
        let a: Vec<f64> = cross.iter().map(|c| c / norm).collect();
        let t: Vec<f64> = x.iter().map(|row| dot(row, &a)).collect();
        let tt = dot(&t, &t);
        if tt <= RANK_TOL * RANK_TOL {
            rank_exhausted = true;
            break;
        }
        // Loading X't, orthonormalized against the previous loadings.
        let mut p = alloc::vec![0.0; r];
        for (row, &ti) in x.iter().zip(&t) {
            for (pk, v) in p.iter_mut().zip(row) {
                *pk += v * ti;
            }
        }
        for _ in 0..2 {
            for q in &loadings {
                let proj = dot(q, &p);
                p.iter_mut().zip(q).for_each(|(pk, qk)| *pk -= proj * qk);
            }
        }
        let pn = dot(&p, &p).sqrt();
        if pn <= RANK_TOL {
            rank_exhausted = true;
            break;
        }
        p.iter_mut().for_each(|v| *v /= pn);
        let proj = dot(&p, &cross);
        cross.iter_mut().zip(&p).for_each(|(c, pk)| *c -= proj * pk);
        loadings.push(p);
        directions.push(a);
    }
    PlsBasis {
        means,
        directions,
        rank_exhausted,
    }
}

/// LDA on the first `components` PLS latent variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlsLdaModel {
    pub basis: PlsBasis,
    pub lda: LdaModel,
}

impl PlsLdaModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.lda.score(&self.basis.project(x, self.basis.n_components()))
    }
}

pub fn fit_pls_lda(ds: &Dataset, s: usize) -> Result<PlsLdaModel> {
    fit_pls_lda_grid(ds, &[s], DEFAULT_RIDGE_SCALE).map(|mut v| v.remove(0))
}

/// One model per component count from a single SIMPLS run. Counts beyond the
/// achievable rank reuse every extracted direction.
pub fn fit_pls_lda_grid(ds: &Dataset, counts: &[usize], ridge_scale: f64) -> Result<Vec<PlsLdaModel>> {
    ds.require_both_classes()?;
    for &s in counts {
        check_count(s, ds.n_biomarkers(), ds.n_subjects())?;
    }
    let rows = ds.complete_rows()?;
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    let max_s = counts.iter().copied().max().unwrap_or(1);
    let full = simpls_rows(&rows, &y, max_s);
    if full.n_components() == 0 {
        return Err(Error::Singular("no PLS direction: X'y is zero".into()));
    }
    let latent: Vec<Vec<f64>> = rows.iter().map(|row| full.project(row, max_s)).collect();
    counts
        .iter()
        .map(|&s| {
            let basis = full.truncated(s);
            let used = basis.n_components();
            let z: Vec<Vec<f64>> = latent.iter().map(|l| l[..used].to_vec()).collect();
            Ok(PlsLdaModel {
                lda: lda_rows(&z, ds.labels(), ridge_scale)?,
                basis,
            })
        })
        .collect()
}
