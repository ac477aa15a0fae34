//! Uniform fit/score interface over QBP and the comparators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::lda::{lda_rows, DEFAULT_RIDGE_SCALE};
use crate::baselines::{
    fit_knn, fit_logistic, fit_pclr_grid, fit_penalized_path, fit_pls_lda_grid, lambda_path, KnnModel, LdaModel,
    LogisticModel, PclrModel, Penalty, PlsLdaModel,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::qbp::{FittedQbp, QbpConfig, QbpProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Qbp,
    Lr,
    PlrLasso,
    PlrEn,
    PlrRidge,
    Pclr,
    Lda,
    PlsLda,
    Knn,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Qbp,
        Method::Lr,
        Method::PlrLasso,
        Method::PlrEn,
        Method::PlrRidge,
        Method::Pclr,
        Method::Lda,
        Method::PlsLda,
        Method::Knn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qbp => "qbp",
            Method::Lr => "lr",
            Method::PlrLasso => "plr-lasso",
            Method::PlrEn => "plr-en",
            Method::PlrRidge => "plr-ridge",
            Method::Pclr => "pclr",
            Method::Lda => "lda",
            Method::PlsLda => "pls-lda",
            Method::Knn => "knn",
        }
    }

    fn penalty(self) -> Option<Penalty> {
        match self {
            Method::PlrLasso => Some(Penalty::Lasso),
            Method::PlrEn => Some(Penalty::ElasticNet),
            Method::PlrRidge => Some(Penalty::Ridge),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == t)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::UnknownMethod(format!("'{s}' (valid: {})", names.join(", ")))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.name().into()
    }
}

/// One candidate setting of a method's tuning parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Params {
    Fixed,
    Qbp { ratio_bounds: Vec<f64>, max_scores: Vec<f64> },
    Lambda { lambda: f64 },
    Components { count: usize },
    Neighbors { k: usize },
}

fn write_list(f: &mut fmt::Formatter<'_>, values: &[f64]) -> fmt::Result {
    f.write_str("(")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Params::Fixed => f.write_str("fixed"),
            Params::Qbp { ratio_bounds, max_scores } => {
                f.write_str("R*=")?;
                write_list(f, ratio_bounds)?;
                f.write_str(" v=")?;
                write_list(f, max_scores)
            }
            Params::Lambda { lambda } => write!(f, "lambda={lambda:.6e}"),
            Params::Components { count } => write!(f, "s={count}"),
            Params::Neighbors { k } => write!(f, "k={k}"),
        }
    }
}

/// Settings shared by every fit that are not tuned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodOptions {
    pub qbp_left_props: Vec<f64>,
    pub qbp_right_props: Vec<f64>,
    /// Elastic-net mixing proportion.
    pub en_alpha: f64,
    /// LDA ridge `ε = scale · trace(Σ) / r`.
    pub lda_ridge_scale: f64,
    pub lambda_count: usize,
    pub lambda_min_ratio: f64,
}

impl Default for MethodOptions {
    fn default() -> Self {
        let qbp = QbpConfig::default();
        Self {
            qbp_left_props: qbp.left_props,
            qbp_right_props: qbp.right_props,
            en_alpha: 0.5,
            lda_ridge_scale: DEFAULT_RIDGE_SCALE,
            lambda_count: 50,
            lambda_min_ratio: 1e-4,
        }
    }
}

impl MethodOptions {
    pub fn qbp_config(&self, ratio_bounds: &[f64], max_scores: &[f64]) -> QbpConfig {
        QbpConfig {
            left_props: self.qbp_left_props.clone(),
            right_props: self.qbp_right_props.clone(),
            ratio_bounds: ratio_bounds.to_vec(),
            max_scores: max_scores.to_vec(),
            weights: None,
        }
    }

    /// The λ candidates for a penalized method on `ds`, largest first.
    pub fn lambda_grid(&self, ds: &Dataset, method: Method) -> Result<Vec<f64>> {
        let penalty = method
            .penalty()
            .ok_or_else(|| Error::InvalidParameter(format!("{method} has no λ")))?;
        lambda_path(ds, penalty, self.en_alpha, self.lambda_count, self.lambda_min_ratio)
    }
}

/// A fitted model of any method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "model", rename_all = "kebab-case")]
pub enum FittedModel {
    Qbp(FittedQbp),
    Logistic(LogisticModel),
    Pclr(PclrModel),
    Lda(LdaModel),
    PlsLda(PlsLdaModel),
    Knn(KnnModel),
}

impl FittedModel {
    /// Continuous risk score; higher means more case-like. Logistic-type
    /// models return the linear predictor, which orders subjects exactly as
    /// the fitted probability does without saturating at 0 or 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Qbp(m) => m.total_disease_score(x),
            FittedModel::Logistic(m) => m.linear_predictor(x),
            FittedModel::Pclr(m) => m.linear_predictor(x),
            FittedModel::Lda(m) => m.score(x),
            FittedModel::PlsLda(m) => m.score(x),
            FittedModel::Knn(m) => m.score(x),
        }
    }

    pub fn score_all(&self, ds: &Dataset) -> Vec<f64> {
        ds.rows().map(|row| self.score(row)).collect()
    }

    /// Biomarkers the model depends on: QBP's nonzero interval scores,
    /// nonzero penalized coefficients, and every biomarker otherwise.
    pub fn selected_biomarkers(&self) -> Vec<bool> {
        match self {
            FittedModel::Qbp(m) => m.selected_biomarkers(),
            FittedModel::Logistic(m) => m.coefficients.iter().map(|&b| b != 0.0).collect(),
            FittedModel::Pclr(m) => vec![true; m.basis.means.len()],
            FittedModel::Lda(m) => vec![true; m.weights.len()],
            FittedModel::PlsLda(m) => vec![true; m.basis.means.len()],
            FittedModel::Knn(m) => vec![true; m.scaler.means.len()],
        }
    }
}

pub fn fit_method(ds: &Dataset, method: Method, params: &Params, options: &MethodOptions) -> Result<FittedModel> {
    fit_grid(ds, method, core::slice::from_ref(params), options).map(|mut v| v.remove(0))
}

fn mismatch(method: Method, params: &Params) -> Error {
    Error::InvalidParameter(format!("{method} cannot use parameters {params}"))
}

/// Fits every setting on the same data, sharing work across settings where
/// the method allows it.
pub fn fit_grid(ds: &Dataset, method: Method, grid: &[Params], options: &MethodOptions) -> Result<Vec<FittedModel>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    match method {
        Method::Qbp => {
            let profile = QbpProfile::fit(ds, &options.qbp_left_props, &options.qbp_right_props)?;
            grid.iter()
                .map(|p| match p {
                    Params::Qbp { ratio_bounds, max_scores } => {
                        profile.score(&options.qbp_config(ratio_bounds, max_scores)).map(FittedModel::Qbp)
                    }
                    other => Err(mismatch(method, other)),
                })
                .collect()
        }
        Method::Lr | Method::Lda => {
            let mut out = Vec::with_capacity(grid.len());
            for p in grid {
                if *p != Params::Fixed {
                    return Err(mismatch(method, p));
                }
                out.push(if method == Method::Lr {
                    FittedModel::Logistic(fit_logistic(ds)?)
                } else {
                    ds.require_both_classes()?;
                    FittedModel::Lda(lda_rows(&ds.complete_rows()?, ds.labels(), options.lda_ridge_scale)?)
                });
            }
            Ok(out)
        }
        Method::PlrLasso | Method::PlrEn | Method::PlrRidge => {
            let lambdas = grid
                .iter()
                .map(|p| match p {
                    Params::Lambda { lambda } => Ok(*lambda),
                    other => Err(mismatch(method, other)),
                })
                .collect::<Result<Vec<f64>>>()?;
            // Fit in decreasing λ for warm starts, then restore grid order.
            let mut order: Vec<usize> = (0..lambdas.len()).collect();
            order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
            let sorted: Vec<f64> = order.iter().map(|&i| lambdas[i]).collect();
            let penalty = method.penalty().expect("penalized method");
            let fits = fit_penalized_path(ds, penalty, &sorted, options.en_alpha)?;
            let mut out: Vec<Option<FittedModel>> = vec![None; grid.len()];
            for (fit, &i) in fits.into_iter().zip(&order) {
                out[i] = Some(FittedModel::Logistic(fit));
            }
            Ok(out.into_iter().map(|m| m.expect("every slot filled")).collect())
        }
        Method::Pclr | Method::PlsLda | Method::Knn => {
            let counts = grid
                .iter()
                .map(|p| match (method, p) {
                    (Method::Knn, Params::Neighbors { k }) => Ok(*k),
                    (Method::Pclr | Method::PlsLda, Params::Components { count }) => Ok(*count),
                    (_, other) => Err(mismatch(method, other)),
                })
                .collect::<Result<Vec<usize>>>()?;
            match method {
                Method::Pclr => Ok(fit_pclr_grid(ds, &counts)?.into_iter().map(FittedModel::Pclr).collect()),
                Method::PlsLda => Ok(fit_pls_lda_grid(ds, &counts, options.lda_ridge_scale)?
                    .into_iter()
                    .map(FittedModel::PlsLda)
                    .collect()),
                _ => {
                    let base = fit_knn(ds, counts[0])?;
                    counts.iter().map(|&k| base.with_k(k).map(FittedModel::Knn)).collect()
                }
            }
        }
    }
}
