//! Empirical quantiles and empirical distribution functions.

use alloc::vec::Vec;


#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use crate::error::{Error, Result};

/// Sorted, non-missing observations of one biomarker within one class.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Sorts the observations. NaN values are rejected as empty input would be.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return Err(Error::EmptyDistribution);
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    /// Drops missing (NaN) observations before sorting.
    pub fn from_observed(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(values.into_iter().filter(|v| !v.is_nan()).collect())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Quantile at proportion `p` by linear interpolation between order
    /// statistics at the 1-based position `h = (n − 1)p + 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProportion(p));
        }
        Ok(interpolated_quantile(&self.sorted, p))
    }

    /// Proportion of observations `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }
}

/// Interpolated order statistic of a nonempty ascending slice.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let mut h = (n - 1) as f64 * p;
    // Positions within rounding error of an order statistic land on it.
    let nearest = h.round();
    if (h - nearest).abs() < 1e-9 {
        h = nearest;
    }
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        sorted[lo.min(n - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}
