//! Parameter tuning by stratified k-fold cross-validation, the simulation
//! benchmark (fresh training and validation sets per repetition) and
//! repeated double cross-validation.
//!
//! Every random stream is derived from a master seed, a stream tag and an
//! index, so any repetition can be recomputed on its own and results do not
//! depend on how jobs are scheduled.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // unused whenever std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_folds, Dataset};
use crate::error::{Error, Result};
use crate::method::{fit_grid, fit_method, Method, MethodOptions, Params};
use crate::metrics::{auc, selection_performance};
use crate::simgen::{sample_dataset, SimDesign};

pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_VALID: u64 = 2;
pub const STREAM_FOLDS: u64 = 3;
pub const STREAM_OUTER: u64 = 4;
pub const STREAM_INNER: u64 = 5;

/// QBP ratio-bound candidates, innermost tail position first.
pub const QBP_RATIO_BOUNDS: [[f64; 3]; 6] = [
    [1.5, 2.0, 3.0],
    [1.5, 2.0, 5.0],
    [1.5, 2.5, 5.0],
    [1.4, 2.5, 8.0],
    [2.0, 3.0, 6.0],
    [2.0, 3.0, 10.0],
];
pub const QBP_MAX_SCORES: [[f64; 3]; 2] = [[1.0, 2.0, 3.0], [1.0, 4.0, 9.0]];
pub const KNN_CANDIDATES: [usize; 27] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 25, 30, 40, 50, 75, 100, 150,
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `tag`, item `index`, under `master`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)) ^ index)
}

pub fn stream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

/// Runs `count` independent jobs and returns their outputs in index order.
pub trait Executor: Sync {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}

/// Ordered candidate settings; ties in tuning go to the earliest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub method: Method,
    pub settings: Vec<Params>,
}

impl ParamGrid {
    pub fn new(method: Method, settings: Vec<Params>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidParameter(format!("empty grid for {method}")));
        }
        Ok(Self { method, settings })
    }

    /// Default candidates for tuning on `ds` with folds whose largest part
    /// has `max_fold_size` subjects.
    pub fn default_for(method: Method, ds: &Dataset, max_fold_size: usize, options: &MethodOptions) -> Result<Self> {
        let n_fit = ds.n_subjects().saturating_sub(max_fold_size);
        let settings = match method {
            Method::Qbp => QBP_RATIO_BOUNDS
                .iter()
                .flat_map(|bounds| {
                    QBP_MAX_SCORES.iter().map(move |scores| Params::Qbp {
                        ratio_bounds: bounds.to_vec(),
                        max_scores: scores.to_vec(),
                    })
                })
                .collect(),
            Method::Lr | Method::Lda => alloc::vec![Params::Fixed],
            Method::PlrLasso | Method::PlrEn | Method::PlrRidge => options
                .lambda_grid(ds, method)?
                .into_iter()
                .map(|lambda| Params::Lambda { lambda })
                .collect(),
            Method::Pclr | Method::PlsLda => (1..=ds.n_biomarkers().min(n_fit.saturating_sub(2)))
                .map(|count| Params::Components { count })
                .collect(),
            Method::Knn => KNN_CANDIDATES
                .iter()
                .filter(|&&k| k <= n_fit)
                .map(|&k| Params::Neighbors { k })
                .collect(),
        };
        Self::new(method, settings)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub chosen: Params,
    pub chosen_index: usize,
    /// Mean held-out AUC of every setting, in grid order.
    pub mean_aucs: Vec<f64>,
}

/// Picks the setting with the highest mean held-out AUC over `k` stratified
/// folds; the earliest setting wins ties.
pub fn kfold_tune(
    ds: &Dataset,
    grid: &ParamGrid,
    k: usize,
    rng: &mut ChaCha8Rng,
    options: &MethodOptions,
) -> Result<TuneOutcome> {
    let folds = stratified_folds(ds, k, rng)?;
    let mut sums = alloc::vec![0.0; grid.settings.len()];
    for fold in 0..k {
        let (train_idx, test_idx) = folds.split(fold);
        let train = ds.subset(&train_idx)?;
        let test = ds.subset(&test_idx)?;
        let models = fit_grid(&train, grid.method, &grid.settings, options)?;
        for (sum, model) in sums.iter_mut().zip(&models) {
            *sum += auc(&model.score_all(&test), test.labels())?;
        }
    }
    let mean_aucs: Vec<f64> = sums.iter().map(|s| s / k as f64).collect();
    let chosen_index = best_index(&mean_aucs);
    Ok(TuneOutcome {
        chosen: grid.settings[chosen_index].clone(),
        chosen_index,
        mean_aucs,
    })
}

/// Index of the largest value, earliest on ties.
pub fn best_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One (method, repetition) outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub repetition: usize,
    /// Chosen setting; `;`-joined over outer folds in double CV.
    pub params: String,
    pub auc: f64,
    /// Selected biomarkers (mean over outer folds in double CV).
    pub n_selected: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub method: Method,
    pub repetition: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<JobFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub repetitions: usize,
    pub mean_auc: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub sd_auc: f64,
    pub mean_selected: f64,
    pub mean_sensitivity: Option<f64>,
    pub mean_specificity: Option<f64>,
    pub mean_accuracy: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl BenchmarkResult {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &BenchmarkRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn mean_auc(&self, method: Method) -> Option<f64> {
        mean_of(self.rows_for(method).map(|r| Some(r.auc)))
    }

    /// Per-method aggregates in order of first appearance.
    pub fn summary(&self) -> Vec<MethodSummary> {
        let mut methods: Vec<Method> = Vec::new();
        for row in &self.rows {
            if !methods.contains(&row.method) {
                methods.push(row.method);
            }
        }
        methods
            .into_iter()
            .map(|method| {
                let aucs: Vec<f64> = self.rows_for(method).map(|r| r.auc).collect();
                let n = aucs.len() as f64;
                let mean = aucs.iter().sum::<f64>() / n;
                let sd = if aucs.len() > 1 {
                    (aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                MethodSummary {
                    method,
                    repetitions: aucs.len(),
                    mean_auc: mean,
                    sd_auc: sd,
                    mean_selected: self.rows_for(method).map(|r| r.n_selected).sum::<f64>() / n,
                    mean_sensitivity: mean_of(self.rows_for(method).map(|r| r.sensitivity)),
                    mean_specificity: mean_of(self.rows_for(method).map(|r| r.specificity)),
                    mean_accuracy: mean_of(self.rows_for(method).map(|r| r.accuracy)),
                }
            })
            .collect()
    }
}

fn collect(jobs: Vec<(Method, usize, Result<BenchmarkRow>)>) -> BenchmarkResult {
    let mut out = BenchmarkResult::default();
    for (method, repetition, res) in jobs {
        match res {
            Ok(row) => out.rows.push(row),
            Err(e) => {
                log::error!("{method} repetition {repetition} failed: {e}");
                out.failures.push(JobFailure {
                    method,
                    repetition,
                    message: e.to_string(),
                });
            }
        }
    }
    out
}

/// Independent-validation protocol on simulated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub design: SimDesign,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub validation_n: usize,
    pub folds: usize,
    pub options: MethodOptions,
}

impl SimulationPlan {
    pub fn new(design: SimDesign, methods: Vec<Method>, repetitions: usize, master_seed: u64) -> Self {
        Self {
            design,
            methods,
            repetitions,
            master_seed,
            validation_n: 5000,
            folds: 6,
            options: MethodOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.methods.is_empty() {
            return Err(Error::InvalidConfig("need at least one repetition and one method".into()));
        }
        self.design.validate()?;
        self.design.with_n(self.validation_n).validate()?;
        let smaller = self.design.n_cases().min(self.design.n - self.design.n_cases());
        if smaller < self.folds || self.folds < 2 {
            return Err(Error::Folds {
                folds: self.folds,
                reason: format!("the smaller class has {smaller} training subjects; each fold needs one"),
            });
        }
        Ok(())
    }
}

/// Tunes on `train`, refits with the chosen setting and scores `valid`.
/// `valid` is only touched after the final fit.
pub fn evaluate_repetition(
    train: &Dataset,
    valid: &Dataset,
    relevant: Option<&[bool]>,
    method: Method,
    folds: usize,
    fold_rng: &mut ChaCha8Rng,
    options: &MethodOptions,
) -> Result<(TuneOutcome, BenchmarkRow)> {
    // Round-robin dealing keeps every fold within ⌈n / k⌉ subjects.
    let grid = ParamGrid::default_for(method, train, train.n_subjects().div_ceil(folds), options)?;
    let tuned = kfold_tune(train, &grid, folds, fold_rng, options)?;
    let model = fit_method(train, method, &tuned.chosen, options)?;
    let scores = model.score_all(valid);
    let selected = model.selected_biomarkers();
    let report = relevant.map(|r| selection_performance(&selected, r)).transpose()?;
    let row = BenchmarkRow {
        method,
        repetition: 0,
        params: tuned.chosen.to_string(),
        auc: auc(&scores, valid.labels())?,
        n_selected: selected.iter().filter(|&&s| s).count() as f64,
        sensitivity: report.and_then(|r| r.sensitivity),
        specificity: report.and_then(|r| r.specificity),
        accuracy: report.map(|r| r.accuracy),
    };
    Ok((tuned, row))
}

pub fn simulate_benchmark<E: Executor>(plan: &SimulationPlan, exec: &E) -> Result<BenchmarkResult> {
    plan.validate()?;
    let n_methods = plan.methods.len();
    let jobs = exec.run(plan.repetitions * n_methods, |job| {
        let (rep, method) = (job / n_methods, plan.methods[job % n_methods]);
        let run = || -> Result<BenchmarkRow> {
            let (train, relevant) = sample_dataset(&plan.design, &mut stream(plan.master_seed, STREAM_TRAIN, rep as u64))?;
            let valid_design = plan.design.with_n(plan.validation_n);
            let (valid, _) = sample_dataset(&valid_design, &mut stream(plan.master_seed, STREAM_VALID, rep as u64))?;
            let mut fold_rng = stream(plan.master_seed, STREAM_FOLDS, rep as u64);
            let (_, mut row) =
                evaluate_repetition(&train, &valid, Some(&relevant), method, plan.folds, &mut fold_rng, &plan.options)?;
            row.repetition = rep;
            Ok(row)
        };
        (method, rep, run())
    });
    Ok(collect(jobs))
}

/// Repeated double cross-validation on a fixed dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdcvPlan {
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub master_seed: u64,
    pub options: MethodOptions,
}

impl RdcvPlan {
    pub fn new(methods: Vec<Method>, repetitions: usize, master_seed: u64) -> Self {
        Self {
            methods,
            repetitions,
            outer_folds: 6,
            inner_folds: 6,
            master_seed,
            options: MethodOptions::default(),
        }
    }
}

fn rdcv_repetition(ds: &Dataset, plan: &RdcvPlan, method: Method, rep: usize) -> Result<BenchmarkRow> {
    let outer = stratified_folds(ds, plan.outer_folds, &mut stream(plan.master_seed, STREAM_OUTER, rep as u64))?;
    let inner_master = derive_seed(plan.master_seed, STREAM_INNER, rep as u64);
    let mut aucs = 0.0;
    let mut selected = 0.0;
    let mut chosen = Vec::with_capacity(plan.outer_folds);
    for fold in 0..plan.outer_folds {
        let (train_idx, test_idx) = outer.split(fold);
        let train = ds.subset(&train_idx)?;
        let test = ds.subset(&test_idx)?;
        let mut inner_rng = ChaCha8Rng::seed_from_u64(derive_seed(inner_master, STREAM_INNER, fold as u64));
        let (tuned, row) =
            evaluate_repetition(&train, &test, None, method, plan.inner_folds, &mut inner_rng, &plan.options)?;
        aucs += row.auc;
        selected += row.n_selected;
        chosen.push(tuned.chosen.to_string());
    }
    let k = plan.outer_folds as f64;
    Ok(BenchmarkRow {
        method,
        repetition: rep,
        params: chosen.join(";"),
        auc: aucs / k,
        n_selected: selected / k,
        sensitivity: None,
        specificity: None,
        accuracy: None,
    })
}

/// Checks that every outer-training part can be split into stratified inner
/// folds.
fn check_nested_folds(ds: &Dataset, outer: usize, inner: usize) -> Result<()> {
    for class in [0u8, 1] {
        let count = ds.labels().iter().filter(|&&y| y == class).count();
        if count < outer {
            return Err(Error::Folds {
                folds: outer,
                reason: format!("class {class} has {count} subjects; each outer fold needs one"),
            });
        }
        // Round-robin dealing puts at most ⌈count / outer⌉ of a class in one fold.
        let remaining = count - count.div_ceil(outer);
        if remaining < inner {
            return Err(Error::Folds {
                folds: inner,
                reason: format!(
                    "an outer training part can hold only {remaining} subjects of class {class}; \
                     stratified inner folds need at least one per fold"
                ),
            });
        }
    }
    Ok(())
}

pub fn rdcv<E: Executor>(ds: &Dataset, plan: &RdcvPlan, exec: &E) -> Result<BenchmarkResult> {
    if plan.repetitions == 0 || plan.methods.is_empty() {
        return Err(Error::InvalidConfig("need at least one repetition and one method".into()));
    }
    ds.require_both_classes()?;
    if plan.outer_folds < 2 || plan.inner_folds < 2 {
        return Err(Error::Folds {
            folds: plan.outer_folds.min(plan.inner_folds),
            reason: "at least two folds are required".into(),
        });
    }
    check_nested_folds(ds, plan.outer_folds, plan.inner_folds)?;
    let n_methods = plan.methods.len();
    let jobs = exec.run(plan.repetitions * n_methods, |job| {
        let (rep, method) = (job / n_methods, plan.methods[job % n_methods]);
        (method, rep, rdcv_repetition(ds, plan, method, rep))
    });
    Ok(collect(jobs))
}
