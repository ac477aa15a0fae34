//! Synthetic biomarker datasets from the simulation designs.
//!
//! Every biomarker `k` of subject `i` is drawn on a latent scale as
//! `v = α_k + β_k y_i + η_k (1 + ν_k − 2 ν_k y_i) z_ik` and reported as
//! `Ψ_k(v)`, where `z_i` is multivariate normal with unit variances and the
//! design's correlation matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{default_names, Dataset};
use crate::error::{Error, Result};

/// Number of biomarkers in every design.
pub const N_BIOMARKERS: usize = 35;

/// Per biomarker: (α, η) for the identity, exp and identity-star
/// parameterizations.
#[rustfmt::skip]
const PARAMS: [[f64; 6]; N_BIOMARKERS] = [
    [617.8, 509.7, 6.19, 0.65, 604.4, 439.2],
    [276.9, 296.3, 5.33, 0.87, 301.1, 322.4],
    [2.61, 14.94, -1.86, 1.53, 0.50, 1.55],
    [6.94, 4.81, 1.62, 0.95, 7.90, 9.52],
    [72.08, 16.72, 4.25, 0.23, 72.13, 17.02],
    [16.69, 17.28, 2.27, 1.21, 20.23, 36.99],
    [3.25, 1.28, 1.11, 0.38, 3.27, 1.30],
    [5.94, 2.73, 1.69, 0.42, 5.94, 2.63],
    [11.66, 13.59, 1.84, 1.22, 13.29, 24.78],
    [1.41, 0.38, 0.31, 0.26, 1.42, 0.38],
    [62.29, 20.64, 4.07, 0.37, 62.73, 23.78],
    [592.1, 1395.0, 5.90, 0.86, 526.6, 549.8],
    [103.1, 129.9, 3.88, 1.36, 121.7, 279.9],
    [177.4, 61.28, 5.13, 0.31, 177.0, 55.50],
    [53.88, 29.79, 3.87, 0.47, 53.74, 26.80],
    [8.55, 0.76, 2.14, 0.09, 8.56, 0.78],
    [12.97, 11.29, 2.30, 0.69, 12.62, 9.84],
    [0.71, 0.48, -0.47, 0.51, 0.71, 0.39],
    [0.37, 1.78, 1.47, 0.78, 5.93, 5.45],
    [0.78, 1.11, -1.54, 2.01, 1.63, 12.27],
    [33.24, 19.59, 3.37, 0.51, 33.17, 18.05],
    [0.31, 0.20, -1.30, 0.58, 0.32, 0.21],
    [0.34, 0.23, -1.29, 0.71, 0.35, 0.29],
    [0.22, 0.29, -1.87, 0.80, 0.21, 0.20],
    [0.07, 0.10, -2.82, 0.64, 0.07, 0.05],
    [3.64, 2.12, 1.04, 1.01, 4.72, 6.29],
    [66.95, 82.64, 3.37, 1.82, 153.1, 794.2],
    [4.98, 2.34, 1.39, 0.92, 6.10, 7.02],
    [21.40, 29.97, 2.64, 0.81, 19.47, 18.87],
    [13.09, 24.77, 1.71, 1.36, 14.03, 32.74],
    [14.69, 12.06, 2.39, 0.82, 15.23, 14.84],
    [7.28, 5.65, 1.77, 0.65, 7.25, 5.26],
    [15.37, 37.54, 1.67, 1.38, 13.69, 32.66],
    [0.13, 0.20, -2.64, 1.21, 0.15, 0.27],
    [22.53, 37.47, 2.62, 0.94, 21.27, 25.29],
];

// 1-based biomarker indices.
const SHIFT_2: [usize; 5] = [6, 13, 20, 27, 34];
const SHIFT_3: [usize; 10] = [3, 6, 9, 13, 17, 20, 23, 27, 30, 34];
const SCALE_SHIFT: [(usize, f64); 9] = [
    (4, -0.15),
    (5, -0.25),
    (7, 0.15),
    (13, 0.15),
    (15, -0.15),
    (16, 0.10),
    (21, 0.20),
    (22, -0.20),
    (28, 0.10),
];
const LOG_SHIFT: [(usize, f64); 7] = [(4, -0.29), (7, -0.44), (9, -0.41), (10, -0.14), (26, 0.32), (29, 0.26), (31, 0.31)];
const STAR_CONTROLS: [usize; 9] = [4, 6, 8, 13, 14, 23, 26, 30, 35];
const IDENTITY_IN_8: [usize; 7] = [3, 5, 11, 16, 19, 21, 22];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Exp,
}

impl Transform {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Exp => v.exp(),
        }
    }
}

/// Location, scale and output transform of one class's latent variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub alpha: f64,
    pub eta: f64,
    pub transform: Transform,
}

impl Latent {
    fn identity(k: usize) -> Self {
        Self { alpha: PARAMS[k][0], eta: PARAMS[k][1], transform: Transform::Identity }
    }
    fn exp(k: usize) -> Self {
        Self { alpha: PARAMS[k][2], eta: PARAMS[k][3], transform: Transform::Exp }
    }
    /// Identity transform with the parameters matched to the log-normal.
    fn identity_star(k: usize) -> Self {
        Self { alpha: PARAMS[k][4], eta: PARAMS[k][5], transform: Transform::Identity }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub control: Latent,
    pub case: Latent,
    /// Case shift of the latent mean.
    pub beta: f64,
    /// Relative scale shift: case sd `η(1 − ν)`, control sd `η(1 + ν)`.
    pub nu: f64,
}

impl MarkerSpec {
    pub fn is_relevant(&self) -> bool {
        self.beta != 0.0 || self.nu != 0.0 || self.control != self.case
    }
}

/// Latent standard deviation `η (1 + ν − 2νy)` for class label `y`.
#[inline]
pub fn latent_sd(eta: f64, nu: f64, y: u8) -> f64 {
    eta * (1.0 + nu - 2.0 * nu * f64::from(y))
}

/// Design identifier: `1`–`5`, or `6`–`8` with variant `a`, `b` or `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DesignId {
    number: u8,
    variant: Option<char>,
}

impl DesignId {
    pub const ALL: [&'static str; 14] = ["1", "2", "3", "4", "5", "6a", "6b", "6c", "7a", "7b", "7c", "8a", "8b", "8c"];

    pub fn new(number: u8, variant: Option<char>) -> Result<Self> {
        let ok = match (number, variant) {
            (1..=5, None) => true,
            (6..=8, Some('a' | 'b' | 'c')) => true,
            _ => false,
        };
        if ok {
            Ok(Self { number, variant })
        } else {
            let shown = match variant {
                Some(v) => format!("{number}{v}"),
                None => format!("{number}"),
            };
            Err(unknown(&shown))
        }
    }

    pub fn number(self) -> u8 {
        self.number
    }

    pub fn variant(self) -> Option<char> {
        self.variant
    }

    pub fn all() -> Vec<Self> {
        Self::ALL.iter().map(|s| s.parse().expect("listed ids parse")).collect()
    }
}

fn unknown(id: &str) -> Error {
    Error::UnknownDesign(format!("'{id}' (valid: {})", DesignId::ALL.join(", ")))
}

impl FromStr for DesignId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let (digits, variant) = match t.char_indices().last() {
            Some((i, c)) if c.is_ascii_alphabetic() => (&t[..i], Some(c)),
            _ => (t.as_str(), None),
        };
        let number: u8 = digits.parse().map_err(|_| unknown(s))?;
        Self::new(number, variant).map_err(|_| unknown(s))
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number)?;
        if let Some(v) = self.variant {
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for DesignId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DesignId> for String {
    fn from(id: DesignId) -> Self {
        format!("{id}")
    }
}

/// Symmetric positive definite matrix with unit diagonal, stored row-major
/// with its lower Cholesky factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    dim: usize,
    values: Vec<f64>,
    #[serde(skip)]
    factor: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut values = vec![0.0; dim * dim];
        for k in 0..dim {
            values[k * dim + k] = 1.0;
        }
        Self { dim, factor: values.clone(), values }
    }

    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * dim || dim == 0 {
            return Err(Error::InvalidCorrelation(format!("expected {dim}×{dim} entries, got {}", values.len())));
        }
        for i in 0..dim {
            if (values[i * dim + i] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidCorrelation(format!("diagonal entry {} is {}", i + 1, values[i * dim + i])));
            }
            for j in 0..i {
                let (a, b) = (values[i * dim + j], values[j * dim + i]);
                if !a.is_finite() || (a - b).abs() > 1e-9 || a.abs() > 1.0 {
                    return Err(Error::InvalidCorrelation(format!(
                        "entries ({}, {}) and ({}, {}) are not a valid symmetric correlation",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let chol = DMatrix::from_row_slice(dim, dim, &values)
            .cholesky()
            .ok_or_else(|| Error::InvalidCorrelation("matrix is not positive definite".into()))?;
        let l = chol.l();
        let factor = (0..dim * dim).map(|idx| l[(idx / dim, idx % dim)]).collect();
        Ok(Self { dim, values, factor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    /// Writes `L g` into `z`.
    fn correlate(&self, g: &[f64], z: &mut [f64]) {
        if self.factor.is_empty() {
            // Deserialized without its factor.
            let rebuilt = Self::new(self.dim, self.values.clone()).expect("validated on construction");
            return rebuilt.correlate(g, z);
        }
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &self.factor[i * self.dim..i * self.dim + i + 1];
            *zi = row.iter().zip(g).map(|(l, x)| l * x).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub id: Option<DesignId>,
    pub markers: Vec<MarkerSpec>,
    pub n: usize,
    pub case_fraction: f64,
    pub correlation: CorrelationMatrix,
}

impl SimDesign {
    pub fn n_biomarkers(&self) -> usize {
        self.markers.len()
    }

    /// `⌊φ n⌋`.
    pub fn n_cases(&self) -> usize {
        (self.case_fraction * self.n as f64 + 1e-9).floor() as usize
    }

    /// Same design with a different subject count.
    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn relevance_mask(&self) -> Vec<bool> {
        self.markers.iter().map(MarkerSpec::is_relevant).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.markers.len();
        if r == 0 || self.correlation.dim() != r {
            return Err(Error::InvalidConfig(format!(
                "{r} biomarkers but a {0}×{0} correlation matrix",
                self.correlation.dim()
            )));
        }
        for (k, m) in self.markers.iter().enumerate() {
            if !(m.control.eta > 0.0 && m.case.eta > 0.0) {
                return Err(Error::InvalidConfig(format!("biomarker {} has a nonpositive scale", k + 1)));
            }
            if !(m.nu.abs() < 0.5) {
                return Err(Error::InvalidConfig(format!("biomarker {} has |ν| ≥ 0.5", k + 1)));
            }
        }
        let cases = self.n_cases();
        if cases == 0 || cases == self.n {
            return Err(Error::InvalidConfig(format!(
                "n = {} with case fraction {} leaves a class empty",
                self.n, self.case_fraction
            )));
        }
        Ok(())
    }
}

pub fn build_design(id: DesignId, correlation: Option<CorrelationMatrix>) -> Result<SimDesign> {
    let correlation = correlation.unwrap_or_else(|| CorrelationMatrix::identity(N_BIOMARKERS));
    if correlation.dim() != N_BIOMARKERS {
        return Err(Error::InvalidCorrelation(format!(
            "designs need a {N_BIOMARKERS}×{N_BIOMARKERS} matrix, got {0}×{0}",
            correlation.dim()
        )));
    }
    let lookup = |table: &[(usize, f64)], k: usize| table.iter().find(|e| e.0 == k + 1).map_or(0.0, |e| e.1);
    let markers = (0..N_BIOMARKERS)
        .map(|k| {
            let one_based = k + 1;
            let same = |l: Latent| (l, l);
            let ((control, case), beta, nu) = match id.number() {
                1 => (same(Latent::identity(k)), 0.0, 0.0),
                2 => (same(Latent::identity(k)), if SHIFT_2.contains(&one_based) { PARAMS[k][1] } else { 0.0 }, 0.0),
                3 => (same(Latent::identity(k)), if SHIFT_3.contains(&one_based) { PARAMS[k][1] } else { 0.0 }, 0.0),
                4 => (same(Latent::identity(k)), 0.0, lookup(&SCALE_SHIFT, k)),
                5 => {
                    let control = if STAR_CONTROLS.contains(&one_based) { Latent::identity_star(k) } else { Latent::exp(k) };
                    ((control, Latent::exp(k)), 0.0, 0.0)
                }
                6 => (same(Latent::exp(k)), lookup(&LOG_SHIFT, k), 0.0),
                7 => (same(Latent::exp(k)), 0.0, lookup(&SCALE_SHIFT, k)),
                _ => {
                    let latent = if IDENTITY_IN_8.contains(&one_based) { Latent::identity(k) } else { Latent::exp(k) };
                    (same(latent), lookup(&LOG_SHIFT, k), lookup(&SCALE_SHIFT, k))
                }
            };
            MarkerSpec { control, case, beta, nu }
        })
        .collect();
    let (n, case_fraction) = match id.variant() {
        None | Some('a') => (100, 0.5),
        Some('b') => (400, 0.5),
        _ => (250, 0.2),
    };
    let design = SimDesign {
        id: Some(id),
        markers,
        n,
        case_fraction,
        correlation,
    };
    design.validate()?;
    Ok(design)
}

/// Draws `n` subjects. Returns the dataset and the relevance mask.
pub fn sample_dataset<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<(Dataset, Vec<bool>)> {
    design.validate()?;
    let r = design.n_biomarkers();
    let n_cases = design.n_cases();
    let mut labels: Vec<u8> = (0..design.n).map(|i| u8::from(i < n_cases)).collect();
    labels.shuffle(rng);
    let mut values = Vec::with_capacity(design.n * r);
    let identity = design.correlation.is_identity();
    let mut g = vec![0.0; r];
    let mut z = vec![0.0; r];
    for &y in &labels {
        for gk in g.iter_mut() {
            *gk = rng.sample(StandardNormal);
        }
        if identity {
            z.copy_from_slice(&g);
        } else {
            design.correlation.correlate(&g, &mut z);
        }
        for (m, &zk) in design.markers.iter().zip(&z) {
            let (latent, shift) = if y == 1 { (m.case, m.beta) } else { (m.control, 0.0) };
            let v = latent.alpha + shift + latent_sd(latent.eta, m.nu, y) * zk;
            values.push(latent.transform.apply(v));
        }
    }
    let ds = Dataset::new(default_names(r), values, labels)?;
    Ok((ds, design.relevance_mask()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mean_sd;
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn design(id: &str) -> SimDesign {
        build_design(id.parse().unwrap(), None).unwrap()
    }

    #[test]
    fn ids_round_trip_and_reject_unknowns() {
        for id in DesignId::ALL {
            assert_eq!(id.parse::<DesignId>().unwrap().to_string(), id);
        }
        for bad in ["0", "6", "5a", "9b", "6d", "x"] {
            let err = bad.parse::<DesignId>().unwrap_err();
            assert!(matches!(err, Error::UnknownDesign(ref m) if m.contains("6a")), "{bad}");
        }
    }

    #[test]
    fn relevance_counts() {
        let expected = [("1", 0), ("2", 5), ("3", 10), ("4", 9), ("5", 9), ("6a", 7), ("7b", 9), ("8c", 14)];
        for (id, count) in expected {
            assert_eq!(design(id).relevance_mask().iter().filter(|&&b| b).count(), count, "design {id}");
        }
    }

    #[test]
    fn design_examples() {
        let d1 = design("1");
        assert!(d1.markers.iter().all(|m| m.beta == 0.0 && m.nu == 0.0));
        assert_eq!((d1.n, d1.case_fraction), (100, 0.5));

        let d6c = design("6c");
        assert_eq!((d6c.n, d6c.n_cases()), (250, 50));
        assert!(d6c.markers.iter().all(|m| m.case.transform == Transform::Exp && m.control.transform == Transform::Exp));

        let m4 = design("4").markers[3];
        assert_eq!((m4.nu, m4.beta, m4.case.transform), (-0.15, 0.0, Transform::Identity));

        let m6 = design("2").markers[5];
        assert_eq!(m6.beta, 17.28);

        let d5 = design("5");
        assert_eq!(d5.markers[3].control, Latent { alpha: 7.90, eta: 9.52, transform: Transform::Identity });
        assert_eq!(d5.markers[3].case, Latent { alpha: 1.62, eta: 0.95, transform: Transform::Exp });
        assert_eq!(d5.markers[0].control, d5.markers[0].case);
    }

    #[test]
    fn latent_sd_example() {
        assert_abs_diff_eq!(latent_sd(2.0, 0.15, 1), 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(latent_sd(2.0, 0.15, 0), 2.3, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_with_exact_case_count() {
        let d = design("6c");
        let a = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().0;
        let b = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(a.n_cases(), 50);
        // Cases are not all at the top after shuffling.
        assert!(a.labels()[..50].iter().any(|&y| y == 0));
    }

    #[test]
    fn null_design_class_means_agree() {
        let d = design("1").with_n(5000);
        let (ds, _) = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        for k in 0..N_BIOMARKERS {
            let (m0, s0) = mean_sd(&ds.class_column(k, 0));
            let (m1, s1) = mean_sd(&ds.class_column(k, 1));
            let se = ((s0 * s0 + s1 * s1) / 2500.0).sqrt();
            assert!((m0 - m1).abs() < 4.0 * se, "biomarker {k}");
        }
    }

    #[test]
    fn log_normal_marker_is_positive_with_expected_log_mean() {
        let d = design("6a").with_n(2000);
        let (ds, _) = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let col = ds.column(0);
        assert!(col.iter().all(|&v| v > 0.0));
        let logs: Vec<f64> = col.iter().map(|v| v.ln()).collect();
        let (m, _) = mean_sd(&logs);
        assert!((m - 6.19).abs() < 3.0 * 0.65 / (2000f64).sqrt(), "{m}");
    }

    #[test]
    fn negative_nu_widens_cases() {
        let d = design("4").with_n(5000);
        let (ds, _) = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        for (k, m) in d.markers.iter().enumerate() {
            if m.nu == 0.0 {
                continue;
            }
            let s0 = mean_sd(&ds.class_column(k, 0)).1;
            let s1 = mean_sd(&ds.class_column(k, 1)).1;
            assert_eq!(s1 > s0, m.nu < 0.0, "biomarker {}", k + 1);
        }
    }

    #[test]
    fn correlated_sampling() {
        let mut values = vec![0.0; 35 * 35];
        for i in 0..35 {
            for j in 0..35 {
                values[i * 35 + j] = if i == j { 1.0 } else { 0.0 };
            }
        }
        values[1] = 0.8;
        values[35] = 0.8;
        let corr = CorrelationMatrix::new(35, values).unwrap();
        let d = build_design("1".parse().unwrap(), Some(corr)).unwrap().with_n(4000);
        let (ds, _) = sample_dataset(&d, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let (a, b) = (ds.column(0), ds.column(1));
        let (ma, sa) = mean_sd(&a);
        let (mb, sb) = mean_sd(&b);
        let c: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (3999.0 * sa * sb);
        assert!((c - 0.8).abs() < 0.03, "{c}");
    }

    #[test]
    fn invalid_correlations_are_rejected() {
        assert!(CorrelationMatrix::new(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(CorrelationMatrix::new(2, vec![2.0, 0.0, 0.0, 1.0]).is_err());
        assert!(CorrelationMatrix::new(3, vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]).is_err());
        assert!(build_design("1".parse().unwrap(), Some(CorrelationMatrix::identity(3))).is_err());
    }
}
