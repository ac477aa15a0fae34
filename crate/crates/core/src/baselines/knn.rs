//! k-nearest-neighbour scoring by the proportion of case votes.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub scaler: Standardizer,
    /// Standardized training rows.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub k: usize,
}

pub fn fit_knn(ds: &Dataset, k: usize) -> Result<KnnModel> {
    ds.require_complete()?;
    let n = ds.n_subjects();
    check_k(k, n)?;
    let scaler = Standardizer::fit(ds)?;
    Ok(KnnModel {
        features: ds.rows().map(|row| scaler.apply_row(row)).collect(),
        labels: ds.labels().to_vec(),
        scaler,
        k,
    })
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// Case-vote proportion for an already standardized query. Every training
/// point tied with the k-th smallest distance votes.
pub fn knn_score(model: &KnnModel, x: &[f64]) -> f64 {
    model.scores_standardized(x, &[model.k])[0]
}

impl KnnModel {
    /// Same training data, different neighbour count.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        check_k(k, self.labels.len())?;
        Ok(Self { k, ..self.clone() })
    }

    /// Scores a raw (unstandardized) query.
    pub fn score(&self, x: &[f64]) -> f64 {
        knn_score(self, &self.scaler.apply_row(x))
    }

    /// Scores a raw query for several neighbour counts from one distance pass.
    pub fn scores_for(&self, x: &[f64], ks: &[usize]) -> Vec<f64> {
        self.scores_standardized(&self.scaler.apply_row(x), ks)
    }

    fn scores_standardized(&self, x: &[f64], ks: &[usize]) -> Vec<f64> {
        let mut dist: Vec<(f64, u8)> = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(row, &y)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), y))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Prefix case counts: cases[i] = cases among the i nearest.
        let mut cases = Vec::with_capacity(dist.len() + 1);
        cases.push(0usize);
        for &(_, y) in &dist {
            cases.push(cases.last().unwrap() + usize::from(y));
        }
        ks.iter()
            .map(|&k| {
                let k = k.clamp(1, dist.len());
                let cutoff = dist[k - 1].0;
                let voters = k + dist[k..].iter().take_while(|d| d.0 == cutoff).count();
                cases[voters] as f64 / voters as f64
            })
            .collect()
    }
}
