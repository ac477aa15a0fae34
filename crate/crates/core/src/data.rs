//! Dataset representation, stratified fold assignment and standardization.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel stored for a missing cell. Finite values are never missing.
pub const MISSING: f64 = f64::NAN;

/// Returns true when `x` encodes a missing cell.
#[inline]
pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}

/// An `n × r` biomarker matrix with binary labels (0 = control, 1 = case).
///
/// Values are stored row-major. A missing cell is stored as NaN, and
/// construction rejects infinities, so every stored number other than NaN is
/// a real observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    labels: Vec<u8>,
    names: Vec<String>,
    n: usize,
    r: usize,
}

impl Dataset {
    /// Builds a dataset from row-major values (`labels.len() × names.len()`).
    pub fn new(names: Vec<String>, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let r = names.len();
        let n = labels.len();
        if r == 0 {
            return Err(Error::InvalidDataset("at least one biomarker column is required".into()));
        }
        if n < 2 {
            return Err(Error::InvalidDataset(format!("at least 2 subjects are required, got {n}")));
        }
        if values.len() != n * r {
            return Err(Error::LengthMismatch {
                expected: n * r,
                actual: values.len(),
            });
        }
        if let Some((row, &value)) = labels.iter().enumerate().find(|(_, &y)| y > 1) {
            return Err(Error::InvalidLabel {
                row,
                value: value.to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate column name `{name}`")));
            }
        }
        if let Some(pos) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::InvalidDataset(format!(
                "infinite value at row {}, column {}",
                pos / r,
                pos % r
            )));
        }
        Ok(Self {
            values,
            labels,
            names,
            n,
            r,
        })
    }

    /// Builds a dataset from rows; biomarker names default to `b1..br`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let r = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != r) {
            return Err(Error::LengthMismatch {
                expected: r,
                actual: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let names = default_names(r);
        let values = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::new(names, values, labels)
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn n_biomarkers(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Row `i`, with NaN marking missing cells.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.r..(i + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.r)
    }

    pub fn get(&self, i: usize, k: usize) -> Option<f64> {
        let v = self.values[i * self.r + k];
        (!is_missing(v)).then_some(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_cases(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn n_controls(&self) -> usize {
        self.n - self.n_cases()
    }

    /// Non-missing values of biomarker `k` among subjects with label `class`.
    pub fn class_column(&self, k: usize, class: u8) -> Vec<f64> {
        self.rows()
            .zip(&self.labels)
            .filter(|(_, &y)| y == class)
            .map(|(row, _)| row[k])
            .filter(|v| !is_missing(*v))
            .collect()
    }

    /// Non-missing values of biomarker `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|row| row[k]).filter(|v| !is_missing(*v)).collect()
    }

    pub fn first_missing(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|v| is_missing(*v))
            .map(|pos| (pos / self.r, pos % self.r))
    }

    pub fn has_missing(&self) -> bool {
        self.first_missing().is_some()
    }

    pub fn require_complete(&self) -> Result<()> {
        match self.first_missing() {
            Some((row, column)) => Err(Error::MissingValue { row, column }),
            None => Ok(()),
        }
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let cases = self.n_cases();
        if cases == 0 || cases == self.n {
            Err(Error::SingleClass)
        } else {
            Ok(())
        }
    }

    /// Dataset restricted to the given subject indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.r);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.names.clone(), values, labels)
    }

    /// Same features with replacement labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.names.clone(), self.values.clone(), labels)
    }

    /// Applies `f` to every non-missing cell of biomarker `k`.
    pub fn map_column(&self, k: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.r) {
            if !is_missing(row[k]) {
                row[k] = f(row[k]);
            }
        }
        Self::new(self.names.clone(), values, self.labels.clone())
    }

    /// Rows as owned vectors, failing on any missing cell.
    pub fn complete_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.require_complete()?;
        Ok(self.rows().map(<[f64]>::to_vec).collect())
    }
}

pub(crate) fn default_names(r: usize) -> Vec<String> {
    (1..=r).map(|k| format!("b{k}")).collect()
}

/// Assignment of every subject to one of `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn n_folds(&self) -> usize {
        self.k
    }

    /// Indices outside and inside fold `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    /// Size of the largest fold.
    pub fn max_fold_size(&self) -> usize {
        let mut counts = vec![0usize; self.k];
        for &f in &self.fold_of {
            counts[f] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }
}

/// Class-stratified assignment of subjects to `k` folds.
///
/// Each class is shuffled and dealt round-robin; the second class continues
/// where the first stopped so that fold sizes also stay within one.
pub fn stratified_folds<R: Rng + ?Sized>(ds: &Dataset, k: usize, rng: &mut R) -> Result<FoldAssignment> {
    let n = ds.n_subjects();
    if k < 2 {
        return Err(Error::Folds {
            folds: k,
            reason: "at least 2 folds are required".into(),
        });
    }
    if k > n {
        return Err(Error::Folds {
            folds: k,
            reason: format!("only {n} subjects"),
        });
    }
    let mut fold_of = vec![0usize; n];
    let mut next = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.labels()[i] == class).collect();
        if members.len() < k {
            return Err(Error::Folds {
                folds: k,
                reason: format!(
                    "class {class} has {} members, fewer than one per fold",
                    members.len()
                ),
            });
        }
        members.shuffle(rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k })
}

/// Per-column centering and scaling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and sample standard deviations (n − 1) over non-missing
    /// values of each column.
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let r = ds.n_biomarkers();
        let mut means = Vec::with_capacity(r);
        let mut sds = Vec::with_capacity(r);
        for k in 0..r {
            let col = ds.column(k);
            if col.len() < 2 {
                return Err(Error::InvalidDataset(format!(
                    "column {k} has {} non-missing values; at least 2 are required",
                    col.len()
                )));
            }
            let (mean, sd) = mean_sd(&col);
            means.push(mean);
            sds.push(sd);
        }
        Ok(Self { means, sds })
    }

    #[inline]
    pub fn apply_value(&self, k: usize, x: f64) -> f64 {
        if is_missing(x) {
            x
        } else if self.sds[k] > 0.0 {
            (x - self.means[k]) / self.sds[k]
        } else {
            0.0
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(k, &x)| self.apply_value(k, x)).collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_biomarkers() != self.means.len() {
            return Err(Error::LengthMismatch {
                expected: self.means.len(),
                actual: ds.n_biomarkers(),
            });
        }
        let values = ds.rows().flat_map(|row| self.apply_row(row)).collect();
        Dataset::new(ds.names().to_vec(), values, ds.labels().to_vec())
    }
}

/// Standardizes every column to mean 0 and sample sd 1; constant columns map
/// to 0.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, Standardizer)> {
    let params = Standardizer::fit(ds)?;
    let out = params.apply(ds)?;
    Ok((out, params))
}

/// Mean and sample standard deviation; exactly 0 when all values are equal.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return (lo, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
