//! Penalized logistic regression (lasso, elastic net, ridge).
//!
//! Maximizes `l(β) − λ Σ_j [(1−α)/2 β_j² + α|β_j|]` over standardized
//! features with an unpenalized intercept. Each outer iteration builds the
//! weighted least-squares approximation of `l` at the current iterate, solves
//! it by cyclic coordinate descent with soft-thresholding, and backtracks
//! along the resulting direction until the penalized objective does not
//! decrease. Coefficients are reported on the original feature scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;

use super::logistic::{log_lik_term, sigmoid, LogisticModel, Penalty, WEIGHT_FLOOR};
use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};

const MAX_OUTER: usize = 100;
const MAX_SWEEPS: usize = 2000;
/// Coordinate-descent sweeps between attempts at an exact support solve.
const REFINE_EVERY: usize = 25;
const INNER_TOL: f64 = 1e-22;
const COEF_TOL: f64 = 1e-9;
/// Fraction of null deviance explained that ends a λ path.
const SATURATION: f64 = 0.999;
/// `α` used for the ridge λ path, which has no finite all-zero threshold.
const RIDGE_PATH_ALPHA: f64 = 1e-3;

/// A penalized fit together with the penalized objective after every outer
/// iteration (the first entry is the starting point).
#[derive(Clone, Debug)]
pub struct PenalizedFit {
    pub model: LogisticModel,
    pub objective_trace: Vec<f64>,
}

/// Mixing proportion implied by the penalty: lasso 1, ridge 0.
pub fn effective_alpha(penalty: Penalty, alpha: f64) -> Result<f64> {
    match penalty {
        Penalty::Lasso | Penalty::None => Ok(1.0),
        Penalty::Ridge => Ok(0.0),
        Penalty::ElasticNet if (0.0..=1.0).contains(&alpha) => Ok(alpha),
        Penalty::ElasticNet => Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]"))),
    }
}

pub fn fit_penalized_logistic(ds: &Dataset, penalty: Penalty, lambda: f64, alpha: f64) -> Result<LogisticModel> {
    fit_penalized_traced(ds, penalty, lambda, alpha).map(|f| f.model)
}

pub fn fit_penalized_traced(ds: &Dataset, penalty: Penalty, lambda: f64, alpha: f64) -> Result<PenalizedFit> {
    let problem = Problem::new(ds)?;
    let alpha = effective_alpha(penalty, alpha)?;
    check_lambda(lambda)?;
    let mut state = problem.null_state();
    let mut trace = Vec::new();
    let (converged, iterations) = problem.solve(&mut state, lambda, alpha, Some(&mut trace));
    Ok(PenalizedFit {
        model: problem.model(&state, penalty, lambda, alpha, converged, iterations),
        objective_trace: trace,
    })
}

/// Fits a sequence of λ values with warm starts; order the path from large
/// to small λ for speed. Once a fit explains at least 99.9% of the null
/// deviance the training data are (nearly) separated, and every later λ
/// reuses that fit instead of chasing diverging coefficients.
pub fn fit_penalized_path(ds: &Dataset, penalty: Penalty, lambdas: &[f64], alpha: f64) -> Result<Vec<LogisticModel>> {
    let problem = Problem::new(ds)?;
    let alpha = effective_alpha(penalty, alpha)?;
    let mut state = problem.null_state();
    let null_ll = problem.log_lik(&state.eta);
    let mut saturated: Option<LogisticModel> = None;
    lambdas
        .iter()
        .map(|&lambda| {
            check_lambda(lambda)?;
            if let Some(model) = &saturated {
                return Ok(model.clone());
            }
            let (converged, iterations) = problem.solve(&mut state, lambda, alpha, None);
            let model = problem.model(&state, penalty, lambda, alpha, converged, iterations);
            if null_ll < 0.0 && 1.0 - problem.log_lik(&state.eta) / null_ll >= SATURATION {
                saturated = Some(model.clone());
            }
            Ok(model)
        })
        .collect()
}

/// Smallest λ at which every slope is zero, from the standardized gradient
/// at the intercept-only model. Ridge uses `α = 0.001` here.
pub fn lambda_max(ds: &Dataset, penalty: Penalty, alpha: f64) -> Result<f64> {
    let problem = Problem::new(ds)?;
    let alpha = effective_alpha(penalty, alpha)?.max(RIDGE_PATH_ALPHA);
    let ybar = problem.y.iter().sum::<f64>() / problem.n as f64;
    let max_grad = problem
        .cols
        .iter()
        .map(|col| col.iter().zip(&problem.y).map(|(x, y)| x * (y - ybar)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    // Rounding in the first descent step must not leave a slope at 1e-17.
    Ok(max_grad / alpha * (1.0 + 1e-9))
}

/// `count` values log-spaced from `lambda_max` down to `lambda_max · min_ratio`.
pub fn lambda_path(ds: &Dataset, penalty: Penalty, alpha: f64, count: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if count == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidParameter("λ path needs count ≥ 1 and ratio in (0, 1)".into()));
    }
    let top = lambda_max(ds, penalty, alpha)?;
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = min_ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|i| top * (step * i as f64).exp()).collect())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda {lambda} must be finite and ≥ 0")))
    }
}

struct Problem {
    /// Standardized columns.
    cols: Vec<Vec<f64>>,
    scaler: Standardizer,
    y: Vec<f64>,
    n: usize,
}

struct State {
    b0: f64,
    b: Vec<f64>,
    eta: Vec<f64>,
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

impl Problem {
    fn new(ds: &Dataset) -> Result<Self> {
        ds.require_both_classes()?;
        ds.require_complete()?;
        let scaler = Standardizer::fit(ds)?;
        let n = ds.n_subjects();
        let cols = (0..ds.n_biomarkers())
            .map(|k| ds.rows().map(|row| scaler.apply_value(k, row[k])).collect())
            .collect();
        let y = ds.labels().iter().map(|&l| f64::from(l)).collect();
        Ok(Self { cols, scaler, y, n })
    }

    fn null_state(&self) -> State {
        let ybar = self.y.iter().sum::<f64>() / self.n as f64;
        let b0 = (ybar / (1.0 - ybar)).ln();
        State {
            b0,
            b: vec![0.0; self.cols.len()],
            eta: vec![b0; self.n],
        }
    }

    fn penalty(&self, b: &[f64], lambda: f64, alpha: f64) -> f64 {
        lambda
            * b.iter()
                .map(|&bj| 0.5 * (1.0 - alpha) * bj * bj + alpha * bj.abs())
                .sum::<f64>()
    }

    fn log_lik(&self, eta: &[f64]) -> f64 {
        eta.iter().zip(&self.y).map(|(&e, &y)| log_lik_term(y, e)).sum()
    }

    fn objective(&self, eta: &[f64], b: &[f64], lambda: f64, alpha: f64) -> f64 {
        self.log_lik(eta) - self.penalty(b, lambda, alpha)
    }

    fn linear_predictor(&self, b0: f64, b: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (col, &bj) in self.cols.iter().zip(b) {
            if bj != 0.0 {
                for (e, x) in eta.iter_mut().zip(col) {
                    *e += bj * x;
                }
            }
        }
        eta
    }

    /// Returns (converged, outer iterations).
    fn solve(&self, state: &mut State, lambda: f64, alpha: f64, mut trace: Option<&mut Vec<f64>>) -> (bool, usize) {
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let mut obj = self.objective(&state.eta, &state.b, lambda, alpha);
        if let Some(t) = trace.as_deref_mut() {
            t.push(obj);
        }
        let p = self.cols.len();
        let mut xw = vec![0.0; p];
        for outer in 1..=MAX_OUTER {
            let mut w = Vec::with_capacity(self.n);
            let mut resid = Vec::with_capacity(self.n);
            for (&e, &y) in state.eta.iter().zip(&self.y) {
                let q = sigmoid(e);
                let wi = (q * (1.0 - q)).max(WEIGHT_FLOOR);
                w.push(wi);
                resid.push((y - q) / wi);
            }
            // Working response of the quadratic approximation.
            let z: Vec<f64> = state.eta.iter().zip(&resid).map(|(e, r)| e + r).collect();
            let sum_w: f64 = w.iter().sum();
            for (xwj, col) in xw.iter_mut().zip(&self.cols) {
                *xwj = col.iter().zip(&w).map(|(x, wi)| wi * x * x).sum();
            }
            let tol = INNER_TOL * sum_w;
            let mut nb0 = state.b0;
            let mut nb = state.b.clone();

            let sweep = |only_active: bool, nb0: &mut f64, nb: &mut [f64], resid: &mut [f64]| -> f64 {
                let d = resid.iter().zip(&w).map(|(r, wi)| r * wi).sum::<f64>() / sum_w;
                *nb0 += d;
                resid.iter_mut().for_each(|r| *r -= d);
                let mut max_change = sum_w * d * d;
                for j in 0..p {
                    if xw[j] <= 0.0 || (only_active && nb[j] == 0.0) {
                        continue;
                    }
                    let col = &self.cols[j];
                    let g = col.iter().zip(resid.iter()).zip(&w).map(|((x, r), wi)| wi * x * r).sum::<f64>()
                        + xw[j] * nb[j];
                    let new = soft_threshold(g, l1) / (xw[j] + l2);
                    let delta = new - nb[j];
                    if delta != 0.0 {
                        for (r, x) in resid.iter_mut().zip(col) {
                            *r -= delta * x;
                        }
                        nb[j] = new;
                        max_change = max_change.max(xw[j] * delta * delta);
                    }
                }
                max_change
            };

            let mut sweeps = 0;
            let mut solved = false;
            while !solved && sweeps < MAX_SWEEPS {
                let budget = (sweeps + REFINE_EVERY).min(MAX_SWEEPS);
                while sweeps < budget {
                    sweeps += 1;
                    if sweep(false, &mut nb0, &mut nb, &mut resid) < tol {
                        solved = true;
                        break;
                    }
                    while sweeps < budget {
                        sweeps += 1;
                        if sweep(true, &mut nb0, &mut nb, &mut resid) < tol {
                            break;
                        }
                    }
                }
                // Slow coordinate descent: solve the support found so far exactly.
                if !solved {
                    if let Some((b0, b)) = self.solve_on_support(&w, &z, &nb, &xw, l1, l2) {
                        nb0 = b0;
                        nb = b;
                        solved = true;
                    }
                }
            }

            // Backtrack along the proximal Newton direction.
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-12 {
                let cb0 = state.b0 + t * (nb0 - state.b0);
                let cb: Vec<f64> = state.b.iter().zip(&nb).map(|(o, n)| o + t * (n - o)).collect();
                let ceta = self.linear_predictor(cb0, &cb);
                let cobj = self.objective(&ceta, &cb, lambda, alpha);
                if cobj >= obj {
                    accepted = Some((cb0, cb, ceta, cobj));
                    break;
                }
                t *= 0.5;
            }
            let Some((cb0, cb, ceta, cobj)) = accepted else {
                return (true, outer);
            };
            let change = state
                .b
                .iter()
                .zip(&cb)
                .map(|(o, n)| (o - n).abs())
                .fold((state.b0 - cb0).abs(), f64::max);
            let gain = cobj - obj;
            state.b0 = cb0;
            state.b = cb;
            state.eta = ceta;
            obj = cobj;
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(obj);
            }
            if change < COEF_TOL || gain <= 1e-14 * (1.0 + obj.abs()) {
                return (true, outer);
            }
        }
        (false, MAX_OUTER)
    }

    /// Exact minimizer of the weighted quadratic with the support and signs
    /// of `b` held fixed, if it keeps those signs and satisfies the
    /// optimality conditions of every zero coefficient.
    fn solve_on_support(&self, w: &[f64], z: &[f64], b: &[f64], xw: &[f64], l1: f64, l2: f64) -> Option<(f64, Vec<f64>)> {
        let support: Vec<usize> = (0..b.len()).filter(|&j| b[j] != 0.0).collect();
        let k = support.len() + 1;
        let mut m = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut v = DVector::<f64>::zeros(k);
        for i in 0..self.n {
            v[0] = 1.0;
            for (a, &j) in support.iter().enumerate() {
                v[a + 1] = self.cols[j][i];
            }
            m.ger(w[i], &v, &v, 1.0);
            rhs.axpy(w[i] * z[i], &v, 1.0);
        }
        for (a, &j) in support.iter().enumerate() {
            m[(a + 1, a + 1)] += l2;
            rhs[a + 1] -= l1 * b[j].signum();
        }
        let sol = m.cholesky()?.solve(&rhs);
        let mut full = vec![0.0; b.len()];
        for (a, &j) in support.iter().enumerate() {
            if sol[a + 1] * b[j].signum() <= 0.0 || !sol[a + 1].is_finite() {
                return None;
            }
            full[j] = sol[a + 1];
        }
        let eta = self.linear_predictor(sol[0], &full);
        let r: Vec<f64> = z.iter().zip(&eta).map(|(zi, e)| zi - e).collect();
        for j in 0..b.len() {
            if b[j] == 0.0 && xw[j] > 0.0 {
                let g: f64 = self.cols[j].iter().zip(&r).zip(w).map(|((x, ri), wi)| wi * x * ri).sum();
                if g.abs() > l1 * (1.0 + 1e-9) + 1e-12 {
                    return None;
                }
            }
        }
        Some((sol[0], full))
    }

    fn model(&self, state: &State, penalty: Penalty, lambda: f64, alpha: f64, converged: bool, iterations: usize) -> LogisticModel {
        let mut intercept = state.b0;
        let coefficients = state
            .b
            .iter()
            .enumerate()
            .map(|(k, &bj)| {
                let sd = self.scaler.sds[k];
                if bj == 0.0 || sd == 0.0 {
                    0.0
                } else {
                    intercept -= bj * self.scaler.means[k] / sd;
                    bj / sd
                }
            })
            .collect();
        LogisticModel {
            intercept,
            coefficients,
            penalty,
            lambda,
            alpha,
            converged,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::logistic::fit_logistic;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noisy(n: usize, r: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|x| {
                let eta = 0.8 * x[0] - 0.5 * x[1] + 0.3;
                u8::from(rng.random::<f64>() < sigmoid(eta))
            })
            .collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn huge_lambda_zeroes_slopes() {
        let ds = noisy(150, 5, 1);
        for penalty in [Penalty::Lasso, Penalty::ElasticNet] {
            let m = fit_penalized_logistic(&ds, penalty, 1e6, 0.5).unwrap();
            assert!(m.coefficients.iter().all(|&b| b == 0.0));
            let prev = ds.n_cases() as f64 / ds.n_subjects() as f64;
            assert_abs_diff_eq!(m.intercept, (prev / (1.0 - prev)).ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn lambda_max_is_the_zeroing_threshold() {
        let ds = noisy(150, 5, 2);
        let top = lambda_max(&ds, Penalty::Lasso, 1.0).unwrap();
        let at = fit_penalized_logistic(&ds, Penalty::Lasso, top * 1.0001, 1.0).unwrap();
        assert_eq!(at.n_nonzero(), 0);
        let below = fit_penalized_logistic(&ds, Penalty::Lasso, top * 0.95, 1.0).unwrap();
        assert!(below.n_nonzero() > 0);
    }

    #[test]
    fn zero_lambda_matches_irls() {
        let ds = noisy(200, 4, 3);
        let mle = fit_logistic(&ds).unwrap();
        let cd = fit_penalized_logistic(&ds, Penalty::Lasso, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(cd.intercept, mle.intercept, epsilon = 1e-6);
        for (a, b) in cd.coefficients.iter().zip(&mle.coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn objective_never_decreases() {
        let ds = noisy(120, 8, 4);
        for (penalty, lambda) in [(Penalty::Lasso, 2.0), (Penalty::ElasticNet, 1.0), (Penalty::Ridge, 5.0), (Penalty::Lasso, 0.0)] {
            let fit = fit_penalized_traced(&ds, penalty, lambda, 0.5).unwrap();
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "{penalty:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn lasso_path_sparsity_decreases_with_lambda() {
        let ds = noisy(200, 10, 5);
        let lambdas = lambda_path(&ds, Penalty::Lasso, 1.0, 20, 1e-3).unwrap();
        let path = fit_penalized_path(&ds, Penalty::Lasso, &lambdas, 1.0).unwrap();
        let counts: Vec<usize> = path.iter().map(LogisticModel::n_nonzero).collect();
        assert_eq!(counts[0], 0);
        // Along decreasing λ the support may shrink by at most one at a step.
        for w in counts.windows(2) {
            assert!(w[1] + 1 >= w[0], "{counts:?}");
        }
        assert!(counts[19] >= 8);
        // Warm-started path agrees with cold fits.
        let cold = fit_penalized_logistic(&ds, Penalty::Lasso, lambdas[10], 1.0).unwrap();
        for (a, b) in cold.coefficients.iter().zip(&path[10].coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let ds = noisy(50, 2, 6);
        assert!(fit_penalized_logistic(&ds, Penalty::Lasso, -1.0, 1.0).is_err());
        assert!(fit_penalized_logistic(&ds, Penalty::ElasticNet, 1.0, 1.5).is_err());
    }

    #[test]
    fn constant_columns_get_zero_coefficients() {
        let base = noisy(100, 2, 7);
        let rows: Vec<Vec<f64>> = base.rows().map(|r| alloc::vec![r[0], 3.0, r[1]]).collect();
        let ds = Dataset::from_rows(&rows, base.labels().to_vec()).unwrap();
        let m = fit_penalized_logistic(&ds, Penalty::Ridge, 0.5, 0.0).unwrap();
        assert_eq!(m.coefficients[1], 0.0);
    }
}
