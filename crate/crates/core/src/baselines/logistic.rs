//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;

/// Lower bound on IRLS weights `π(1 − π)`.
pub const WEIGHT_FLOOR: f64 = 1e-10;

const MAX_ITERATIONS: usize = 100;
const LL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    None,
    Lasso,
    ElasticNet,
    Ridge,
}

/// Logistic model `π(x) = 1 / (1 + exp(−β₀ − x'β))` on the original feature scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: Penalty,
    pub lambda: f64,
    pub alpha: f64,
    /// False when the iteration limit was hit or the data are separable, in
    /// which case the coefficients are the last iterate.
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }

    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|&&b| b != 0.0).count()
    }
}

#[inline]
pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `y·η − log(1 + e^η)` without overflow.
#[inline]
pub(crate) fn log_lik_term(y: f64, eta: f64) -> f64 {
    let softplus = eta.max(0.0) + (-eta.abs()).exp().ln_1p();
    y * eta - softplus
}

/// Log-likelihood of `(intercept, beta)` on rows `x` with 0/1 targets `y`.
pub fn log_likelihood(x: &[Vec<f64>], y: &[f64], intercept: f64, beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = intercept + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            log_lik_term(yi, eta)
        })
        .sum()
}

/// Score vector `∂l/∂(β₀, β)`.
pub fn log_likelihood_gradient(x: &[Vec<f64>], y: &[f64], intercept: f64, beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len() + 1];
    for (row, &yi) in x.iter().zip(y) {
        let eta = intercept + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        let resid = yi - sigmoid(eta);
        g[0] += resid;
        for (gj, xj) in g[1..].iter_mut().zip(row) {
            *gj += resid * xj;
        }
    }
    g
}

pub(crate) struct IrlsFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Newton–Raphson on the log-likelihood with step halving. Singular Hessians
/// (collinear or constant columns) fall back to a minimum-norm solve.
pub(crate) fn irls(x: &[Vec<f64>], y: &[f64]) -> IrlsFit {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len) + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let mut theta = DVector::<f64>::zeros(p);
    let ll_of = |t: &DVector<f64>| -> f64 {
        let eta = &design * t;
        eta.iter().zip(y).map(|(&e, &yi)| log_lik_term(yi, e)).sum()
    };
    let mut ll = ll_of(&theta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = &design * &theta;
        let prob = eta.map(sigmoid);
        let w = prob.map(|q| (q * (1.0 - q)).max(WEIGHT_FLOOR));
        let grad = design.tr_mul(&(&target - &prob));
        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let hessian = design.tr_mul(&weighted);
        let Some(step) = solve_spd(hessian, &grad) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let cand = &theta + &step * t;
            let ll_cand = ll_of(&cand);
            if ll_cand.is_finite() && ll_cand >= ll {
                accepted = Some((cand, ll_cand));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_new)) = accepted else {
            converged = true;
            break;
        };
        let improvement = ll_new - ll;
        theta = cand;
        ll = ll_new;
        if improvement < LL_TOLERANCE {
            converged = true;
            break;
        }
    }
    let eta = &design * &theta;
    let separated = eta.iter().zip(y).all(|(&e, &yi)| if yi > 0.5 { e > 0.0 } else { e < 0.0 });
    IrlsFit {
        intercept: theta[0],
        beta: theta.iter().skip(1).copied().collect(),
        converged: converged && !separated,
        iterations,
    }
}

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if lo * lo > 1e-13 * hi * hi {
            let x = chol.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
    }
    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let svd = a.svd(true, true);
    svd.solve(b, scale * 1e-12).ok().filter(|x| x.iter().all(|v| v.is_finite()))
}

/// Unpenalized maximum-likelihood fit with an intercept.
pub fn fit_logistic(ds: &Dataset) -> Result<LogisticModel> {
    ds.require_both_classes()?;
    let x = ds.complete_rows()?;
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    Ok(fit_logistic_rows(&x, &y))
}

pub(crate) fn fit_logistic_rows(x: &[Vec<f64>], y: &[f64]) -> LogisticModel {
    let fit = irls(x, y);
    LogisticModel {
        intercept: fit.intercept,
        coefficients: fit.beta,
        penalty: Penalty::None,
        lambda: 0.0,
        alpha: 0.0,
        converged: fit.converged,
        iterations: fit.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_zero_feature_gives_prevalence_logit() {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![0.0]).collect();
        let labels = vec![1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let m = fit_logistic(&ds).unwrap();
        assert_abs_diff_eq!(m.intercept, (7.0f64 / 3.0).ln(), epsilon = 1e-8);
        assert!(m.converged);
    }

    #[test]
    fn constant_nonzero_feature_fits_prevalence() {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![4.0]).collect();
        let labels = vec![1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let m = fit_logistic(&ds).unwrap();
        assert_abs_diff_eq!(m.linear_predictor(&[4.0]), (7.0f64 / 3.0).ln(), epsilon = 1e-8);
    }

    #[test]
    fn separable_data_is_flagged() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = (0..20).map(|i| u8::from(i >= 10)).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let m = fit_logistic(&ds).unwrap();
        assert!(!m.converged);
        assert!(m.coefficients[0] > 0.0);
    }

    #[test]
    fn probabilities_are_strictly_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(rng.random::<f64>() < 0.3 + 0.4 * r[0])).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let m = fit_logistic(&ds).unwrap();
        assert!(m.converged);
        for r in &rows {
            let p = m.probability(r);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn missing_cells_are_rejected() {
        let ds = Dataset::new(
            alloc::vec!["b1".into()],
            alloc::vec![1.0, f64::NAN, 2.0],
            alloc::vec![0, 1, 1],
        )
        .unwrap();
        assert!(fit_logistic(&ds).is_err());
    }
}
