//! Quantile based prediction.
//!
//! For every biomarker and each tail, the group whose anchor quantile lies
//! deeper in the tail is *predominant*. Cutpoints are the quantiles of the
//! other group at a ladder of tail proportions, and each cutpoint carries an
//! *exceedratio*: the predominant group's mass beyond the cutpoint divided by
//! the nominal tail proportion. Ratios that clear their lower bound switch on
//! interval scores, which grow (never shrink) moving outward. A subject's
//! total disease score is the weighted sum over biomarkers of the score of
//! the interval containing its value.
//!
//! All per-tail lists are ordered innermost first: index 0 belongs to the
//! anchor proportion (`p_L0` / `p_R0`) and index `m` to the most extreme one.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{is_missing, Dataset};
use crate::error::{Error, Result};
use crate::quantiles::EmpiricalDistribution;

/// Class membership: controls carry label 0, cases label 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Case,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::Control => 0,
            Group::Case => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Group::Control => Group::Case,
            Group::Case => Group::Control,
        }
    }

    /// Sign of interval scores in a tail dominated by this group.
    pub fn sign(self) -> f64 {
        match self {
            Group::Control => -1.0,
            Group::Case => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Tail proportions, exceedratio lower bounds, maximal interval scores and
/// biomarker weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QbpConfig {
    /// Strictly decreasing proportions below 0.5, anchor first.
    pub left_props: Vec<f64>,
    /// Strictly increasing proportions above 0.5, anchor first.
    pub right_props: Vec<f64>,
    /// Lower bound on the exceedratio at each tail position, anchor first.
    pub ratio_bounds: Vec<f64>,
    /// Nondecreasing maximal interval scores `v_1..v_{m+1}`.
    pub max_scores: Vec<f64>,
    /// One weight per biomarker; `None` weighs every biomarker 1.
    pub weights: Option<Vec<f64>>,
}

impl Default for QbpConfig {
    fn default() -> Self {
        Self {
            left_props: vec![0.10, 0.05, 0.01],
            right_props: vec![0.90, 0.95, 0.99],
            ratio_bounds: vec![1.5, 2.0, 3.0],
            max_scores: vec![1.0, 2.0, 3.0],
            weights: None,
        }
    }
}

impl QbpConfig {
    /// Configuration whose right-tail proportions mirror the left: `p_R = 1 − p_L`.
    pub fn symmetric(left_props: Vec<f64>, ratio_bounds: Vec<f64>, max_scores: Vec<f64>) -> Result<Self> {
        let right_props = left_props.iter().map(|p| 1.0 - p).collect();
        let config = Self {
            left_props,
            right_props,
            ratio_bounds,
            max_scores,
            weights: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Number of proportions per tail (`m + 1`).
    pub fn tail_len(&self) -> usize {
        self.left_props.len()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.left_props.len();
        if len == 0 {
            return Err(Error::InvalidConfig("at least one tail proportion is required".into()));
        }
        for (what, list) in [
            ("right_props", &self.right_props),
            ("ratio_bounds", &self.ratio_bounds),
            ("max_scores", &self.max_scores),
        ] {
            if list.len() != len {
                return Err(Error::InvalidConfig(format!(
                    "{what} has {} entries but left_props has {len}",
                    list.len()
                )));
            }
        }
        if self.left_props.iter().any(|&p| !(p > 0.0 && p < 0.5)) {
            return Err(Error::InvalidConfig("left proportions must lie in (0, 0.5)".into()));
        }
        if self.right_props.iter().any(|&p| !(p > 0.5 && p < 1.0)) {
            return Err(Error::InvalidConfig("right proportions must lie in (0.5, 1)".into()));
        }
        if self.left_props.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig("left proportions must decrease moving outward".into()));
        }
        if self.right_props.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("right proportions must increase moving outward".into()));
        }
        if self.ratio_bounds.iter().any(|&b| !(b > 1.0) || !b.is_finite()) {
            return Err(Error::InvalidConfig("exceedratio bounds must be finite and > 1".into()));
        }
        if self.max_scores.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("maximal interval scores must be positive".into()));
        }
        if self.max_scores.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("maximal interval scores must be nondecreasing".into()));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Relative tolerance, scaled by the largest magnitude in a biomarker's
/// sample, under which two values count as equal. Interpolated quantiles that
/// coincide exactly in real arithmetic can differ in their last bits.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Absolute tie tolerance for one biomarker.
fn tie_tolerance(controls: &EmpiricalDistribution, cases: &EmpiricalDistribution) -> f64 {
    let magnitude = [controls, cases]
        .iter()
        .flat_map(|d| [d.sorted_values()[0], d.sorted_values()[d.len() - 1]])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    TIE_TOLERANCE * magnitude
}

/// Replaces `q` by the nearest observed value of either class when they are
/// within `tol`, so that later `≤` comparisons against data are exact.
fn snap_to_data(q: f64, controls: &EmpiricalDistribution, cases: &EmpiricalDistribution, tol: f64) -> f64 {
    let mut best = q;
    let mut gap = tol;
    for d in [controls, cases] {
        let v = d.sorted_values();
        let i = v.partition_point(|&x| x < q);
        for &x in v[i.saturating_sub(1)..(i + 1).min(v.len())].iter() {
            if (x - q).abs() <= gap {
                gap = (x - q).abs();
                best = x;
            }
        }
    }
    best
}

/// Predominant group in the left and right tails, compared at the anchor
/// proportions. `None` means the two quantiles coincide up to
/// [`TIE_TOLERANCE`].
pub fn determine_predominance(
    controls: &EmpiricalDistribution,
    cases: &EmpiricalDistribution,
    p0_left: f64,
    p0_right: f64,
) -> Result<(Option<Group>, Option<Group>)> {
    let tol = tie_tolerance(controls, cases);
    let deeper = |p: f64, deeper_is_lower: bool| -> Result<Option<Group>> {
        let (q0, q1) = (controls.quantile(p)?, cases.quantile(p)?);
        Ok(if (q0 - q1).abs() <= tol {
            None
        } else if (q1 < q0) == deeper_is_lower {
            Some(Group::Case)
        } else {
            Some(Group::Control)
        })
    };
    Ok((deeper(p0_left, true)?, deeper(p0_right, false)?))
}

/// Quantiles of the non-predominant group at each tail proportion.
pub fn compute_cutpoints(nonpredominant: &EmpiricalDistribution, props: &[f64]) -> Result<Vec<f64>> {
    props.iter().map(|&p| nonpredominant.quantile(p)).collect()
}

/// Predominant-group tail mass beyond each cutpoint relative to the nominal
/// tail proportion.
pub fn exceed_ratios(
    predominant: &EmpiricalDistribution,
    cutpoints: &[f64],
    props: &[f64],
    side: Side,
) -> Result<Vec<f64>> {
    if cutpoints.len() != props.len() {
        return Err(Error::LengthMismatch {
            expected: props.len(),
            actual: cutpoints.len(),
        });
    }
    Ok(cutpoints
        .iter()
        .zip(props)
        .map(|(&c, &p)| match side {
            Side::Left => predominant.ecdf(c) / p,
            Side::Right => (1.0 - predominant.ecdf(c)) / (1.0 - p),
        })
        .collect())
}

/// `true` where an exceedratio reaches its lower bound.
pub fn exceed_scores(ratios: &[f64], bounds: &[f64]) -> Result<Vec<bool>> {
    if ratios.len() != bounds.len() {
        return Err(Error::LengthMismatch {
            expected: bounds.len(),
            actual: ratios.len(),
        });
    }
    Ok(ratios.iter().zip(bounds).map(|(r, b)| r >= b).collect())
}

/// Signed interval scores: the score of interval `s` (1-based, moving
/// outward) is the running maximum of `v_j · e_{j−1}` over `j ≤ s`, signed by
/// the predominant group.
pub fn interval_scores(exceed: &[bool], max_scores: &[f64], predominant: Group) -> Result<Vec<f64>> {
    if exceed.len() != max_scores.len() {
        return Err(Error::LengthMismatch {
            expected: max_scores.len(),
            actual: exceed.len(),
        });
    }
    let sign = predominant.sign();
    let mut running = 0.0f64;
    Ok(exceed
        .iter()
        .zip(max_scores)
        .map(|(&e, &v)| {
            if e {
                running = running.max(v);
            }
            sign * running
        })
        .collect())
}

/// Bound-independent characteristics of one tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub predominant: Option<Group>,
    pub cutpoints: Vec<f64>,
    pub exceed_ratios: Vec<f64>,
}

impl TailProfile {
    fn fit(
        side: Side,
        predominant: Option<Group>,
        controls: &EmpiricalDistribution,
        cases: &EmpiricalDistribution,
        props: &[f64],
    ) -> Result<Self> {
        let by_group = |g: Group| match g {
            Group::Control => controls,
            Group::Case => cases,
        };
        let tol = tie_tolerance(controls, cases);
        match predominant {
            Some(g) => {
                let cutpoints: Vec<f64> = compute_cutpoints(by_group(g.other()), props)?
                    .into_iter()
                    .map(|c| snap_to_data(c, controls, cases, tol))
                    .collect();
                let exceed_ratios = exceed_ratios(by_group(g), &cutpoints, props, side)?;
                Ok(Self {
                    predominant,
                    cutpoints,
                    exceed_ratios,
                })
            }
            // Neutral tail: boundaries from the controls, nothing scored.
            None => Ok(Self {
                predominant,
                cutpoints: compute_cutpoints(controls, props)?
                    .into_iter()
                    .map(|c| snap_to_data(c, controls, cases, tol))
                    .collect(),
                exceed_ratios: vec![0.0; props.len()],
            }),
        }
    }

    fn score(&self, bounds: &[f64], max_scores: &[f64]) -> Result<TailFit> {
        let (exceed, scores) = match self.predominant {
            Some(g) => {
                let e = exceed_scores(&self.exceed_ratios, bounds)?;
                let v = interval_scores(&e, max_scores, g)?;
                (e, v)
            }
            None => (vec![false; bounds.len()], vec![0.0; bounds.len()]),
        };
        Ok(TailFit {
            predominant: self.predominant,
            cutpoints: self.cutpoints.clone(),
            exceed_ratios: self.exceed_ratios.clone(),
            exceed_scores: exceed,
            interval_scores: scores,
        })
    }
}

/// Fitted characteristics and scores of one tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub predominant: Option<Group>,
    pub cutpoints: Vec<f64>,
    pub exceed_ratios: Vec<f64>,
    pub exceed_scores: Vec<bool>,
    /// Score of intervals `I_1..I_{m+1}` moving outward.
    pub interval_scores: Vec<f64>,
}

impl TailFit {
    fn has_signal(&self) -> bool {
        self.interval_scores.iter().any(|&v| v != 0.0)
    }
}

/// Per-biomarker tail profiles; scoring them under different bounds and
/// maximal scores avoids recomputing quantiles.
#[derive(Clone, Debug, PartialEq)]
pub struct QbpProfile {
    pub left_props: Vec<f64>,
    pub right_props: Vec<f64>,
    pub names: Vec<String>,
    pub tails: Vec<(TailProfile, TailProfile)>,
}

impl QbpProfile {
    /// Quantiles use only non-missing values; each class needs at least two
    /// per biomarker.
    pub fn fit(ds: &Dataset, left_props: &[f64], right_props: &[f64]) -> Result<Self> {
        ds.require_both_classes()?;
        if left_props.is_empty() || left_props.len() != right_props.len() {
            return Err(Error::InvalidConfig("left and right tails need equally many proportions".into()));
        }
        let tails = (0..ds.n_biomarkers())
            .map(|k| {
                let controls = class_distribution(ds, k, 0)?;
                let cases = class_distribution(ds, k, 1)?;
                let (dl, dr) = determine_predominance(&controls, &cases, left_props[0], right_props[0])?;
                Ok((
                    TailProfile::fit(Side::Left, dl, &controls, &cases, left_props)?,
                    TailProfile::fit(Side::Right, dr, &controls, &cases, right_props)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            left_props: left_props.to_vec(),
            right_props: right_props.to_vec(),
            names: ds.names().to_vec(),
            tails,
        })
    }

    /// Applies the config's bounds, maximal scores and weights. Its tail
    /// proportions must match the ones the profile was fitted with.
    pub fn score(&self, config: &QbpConfig) -> Result<FittedQbp> {
        config.validate()?;
        if config.left_props != self.left_props || config.right_props != self.right_props {
            return Err(Error::InvalidConfig("tail proportions differ from the fitted profile".into()));
        }
        let biomarkers = self
            .tails
            .iter()
            .zip(&self.names)
            .map(|((left, right), name)| {
                Ok(BiomarkerFit::new(
                    name.clone(),
                    left.score(&config.ratio_bounds, &config.max_scores)?,
                    right.score(&config.ratio_bounds, &config.max_scores)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        FittedQbp::new(config.clone(), biomarkers)
    }
}

fn class_distribution(ds: &Dataset, k: usize, class: u8) -> Result<EmpiricalDistribution> {
    let values = ds.class_column(k, class);
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            biomarker: k,
            class,
            count: values.len(),
        });
    }
    EmpiricalDistribution::new(values)
}

/// Left and right tail fits of one biomarker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerFit {
    pub name: String,
    pub left: TailFit,
    pub right: TailFit,
    /// Innermost left cutpoint at or above the innermost right cutpoint.
    pub tails_overlap: bool,
}

impl BiomarkerFit {
    pub fn new(name: String, left: TailFit, right: TailFit) -> Self {
        let tails_overlap = match (left.cutpoints.first(), right.cutpoints.first()) {
            (Some(l), Some(r)) => l >= r,
            _ => false,
        };
        if tails_overlap {
            log::warn!("biomarker `{name}`: left and right tail cutpoints overlap; left tail takes precedence");
        }
        Self {
            name,
            left,
            right,
            tails_overlap,
        }
    }

    /// Unweighted score of the interval containing `x`; 0 for a missing value.
    ///
    /// Left intervals are right-closed, right intervals left-closed and the
    /// central interval open. Left membership is tested before right.
    pub fn interval_score(&self, x: f64) -> f64 {
        if is_missing(x) {
            return 0.0;
        }
        let left = &self.left.cutpoints;
        if left.first().is_some_and(|&c| x <= c) {
            let depth = left.iter().take_while(|&&c| x <= c).count();
            return self.left.interval_scores[depth - 1];
        }
        let right = &self.right.cutpoints;
        if right.first().is_some_and(|&c| x >= c) {
            let depth = right.iter().take_while(|&&c| x >= c).count();
            return self.right.interval_scores[depth - 1];
        }
        0.0
    }

    pub fn is_selected(&self) -> bool {
        self.left.has_signal() || self.right.has_signal()
    }
}

/// A fitted QBP classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedQbp {
    pub config: QbpConfig,
    pub biomarkers: Vec<BiomarkerFit>,
    weights: Vec<f64>,
}

impl FittedQbp {
    pub fn new(config: QbpConfig, biomarkers: Vec<BiomarkerFit>) -> Result<Self> {
        let weights = match &config.weights {
            Some(w) if w.len() != biomarkers.len() => {
                return Err(Error::LengthMismatch {
                    expected: biomarkers.len(),
                    actual: w.len(),
                })
            }
            Some(w) => w.clone(),
            None => vec![1.0; biomarkers.len()],
        };
        Ok(Self {
            config,
            biomarkers,
            weights,
        })
    }

    pub fn n_biomarkers(&self) -> usize {
        self.biomarkers.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted interval score of biomarker `k` at value `x` (NaN = missing → 0).
    pub fn disease_score(&self, k: usize, x: f64) -> f64 {
        let v = self.biomarkers[k].interval_score(x);
        if v == 0.0 {
            0.0
        } else {
            v * self.weights[k]
        }
    }

    /// Sum of disease scores over all biomarkers; higher is more case-like.
    ///
    /// # Panics
    /// If `subject` does not hold one value per biomarker.
    pub fn total_disease_score(&self, subject: &[f64]) -> f64 {
        assert_eq!(subject.len(), self.biomarkers.len(), "subject length");
        subject.iter().enumerate().map(|(k, &x)| self.disease_score(k, x)).sum()
    }

    /// A biomarker is selected when any interval score in either tail is nonzero.
    pub fn selected_biomarkers(&self) -> Vec<bool> {
        self.biomarkers.iter().map(BiomarkerFit::is_selected).collect()
    }
}

/// Fits tail characteristics and interval scores for every biomarker.
pub fn fit_qbp(ds: &Dataset, config: &QbpConfig) -> Result<FittedQbp> {
    config.validate()?;
    if let Some(w) = &config.weights {
        if w.len() != ds.n_biomarkers() {
            return Err(Error::LengthMismatch {
                expected: ds.n_biomarkers(),
                actual: w.len(),
            });
        }
    }
    QbpProfile::fit(ds, &config.left_props, &config.right_props)?.score(config)
}
