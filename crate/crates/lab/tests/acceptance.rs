//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use qbplab::io::write_benchmark;
use qbplab::Pool;
use qbplab_core::baselines::{fit_logistic, fit_penalized_logistic, log_likelihood, log_likelihood_gradient, Penalty};
use qbplab_core::cv::{simulate_benchmark, BenchmarkResult, SimulationPlan};
use qbplab_core::metrics::{auc, auc_rank, roc_curve};
use qbplab_core::qbp::{BiomarkerFit, Group, TailFit};
use qbplab_core::simgen::build_design;
use qbplab_core::{fit_qbp, Dataset, FittedQbp, Method, QbpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MASTER_SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Suite {
    failed: usize,
    /// Criteria selected by `ACCEPTANCE_ONLY=3,7`; all when unset.
    only: Option<Vec<u32>>,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, budget: Option<Duration>, check: impl FnOnce() -> Outcome) {
        if self.only.as_ref().is_some_and(|ids| !ids.contains(&id)) {
            println!("SKIP {id:>2} {name}");
            return;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                self.failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {id:>2} {name}: {detail} [{elapsed:.2?}]");
    }
}

fn benchmark(design: &str, methods: &[Method], reps: usize, pool: &Pool) -> BenchmarkResult {
    let design = build_design(design.parse().unwrap(), None).unwrap();
    let plan = SimulationPlan::new(design, methods.to_vec(), reps, MASTER_SEED);
    let result = simulate_benchmark(&plan, pool).unwrap();
    assert!(result.failures.is_empty(), "failed jobs: {:?}", result.failures);
    result
}

fn mean_aucs(result: &BenchmarkResult) -> Vec<(Method, f64)> {
    result.summary().iter().map(|s| (s.method, s.mean_auc)).collect()
}

fn show(values: &[(Method, f64)]) -> String {
    values.iter().map(|(m, a)| format!("{m}={a:.4}")).collect::<Vec<_>>().join(" ")
}

/// Sorted sample of 1001 values that passes through the given
/// (order statistic, value) anchors, interpolating linearly between them.
fn anchored_sample(anchors: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(1001);
    for w in anchors.windows(2) {
        let ((i0, v0), (i1, v1)) = (w[0], w[1]);
        for i in i0..i1 {
            out.push(v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64);
        }
    }
    out.push(anchors.last().unwrap().1);
    assert_eq!(out.len(), 1001);
    out
}

fn worked_example() -> Outcome {
    // With 1001 values the type-7 quantile at p is order statistic 1000p, and
    // the class sizes put tail areas on the required values up to 1/1001.
    let controls = anchored_sample(&[
        (0, 200.0),
        (10, 273.0),
        (50, 372.0),
        (100, 424.0),
        (593, 643.9),
        (594, 644.1),
        (760, 712.9),
        (761, 713.1),
        (900, 796.0),
        (950, 849.0),
        (970, 879.9),
        (971, 880.1),
        (990, 947.0),
        (1000, 1000.0),
    ]);
    let cases = anchored_sample(&[
        (0, 274.0),
        (10, 357.0),
        (30, 371.9),
        (31, 372.1),
        (50, 380.0),
        (100, 396.0),
        (224, 423.9),
        (225, 424.1),
        (900, 644.0),
        (950, 713.0),
        (990, 880.0),
        (1000, 950.0),
    ]);
    let rows: Vec<Vec<f64>> = controls.iter().chain(&cases).map(|&v| vec![v]).collect();
    let labels = [0u8, 1].iter().flat_map(|&y| std::iter::repeat(y).take(1001)).collect();
    let ds = Dataset::from_rows(&rows, labels).map_err(|e| e.to_string())?;
    let config = QbpConfig::symmetric(vec![0.1, 0.05, 0.01], vec![2.0, 3.0, 5.0], vec![1.0, 2.0, 3.0]).unwrap();
    let fit = fit_qbp(&ds, &config).map_err(|e| e.to_string())?;
    let b = &fit.biomarkers[0];
    let close = |a: &[f64], e: &[f64], tol: f64| a.iter().zip(e).all(|(x, y)| (x - y).abs() <= tol);
    let ok = b.left.predominant == Some(Group::Case)
        && b.right.predominant == Some(Group::Control)
        && b.left.cutpoints == [424.0, 372.0, 273.0]
        && b.right.cutpoints == [644.0, 713.0, 880.0]
        && close(&b.left.exceed_ratios, &[2.25, 0.62, 0.0], 0.01)
        && close(&b.right.exceed_ratios, &[4.07, 4.8, 3.0], 0.01)
        && b.left.exceed_scores == [true, false, false]
        && b.right.exceed_scores == [true, true, false]
        && b.left.interval_scores == [1.0, 1.0, 1.0]
        && b.right.interval_scores == [-1.0, -2.0, -2.0];
    ensure(
        ok,
        format!(
            "cutpoints {:?} | {:?}, ratios {:.3?} | {:.3?}, interval scores {:?} | {:?}",
            b.left.cutpoints,
            b.right.cutpoints,
            b.left.exceed_ratios,
            b.right.exceed_ratios,
            b.left.interval_scores,
            b.right.interval_scores
        ),
    )
}

fn subject_scoring() -> Outcome {
    // Interval scores per biomarker from the innermost interval outward.
    let table: [([f64; 3], [f64; 3]); 5] = [
        ([1.0, 1.0, 1.0], [-1.0, -2.0, -2.0]),
        ([-1.0, -1.0, -1.0], [0.0, 0.0, 0.0]),
        ([1.0, 2.0, 2.0], [1.0, 2.0, 3.0]),
        ([-1.0, -1.0, -3.0], [0.0, 0.0, 3.0]),
        ([0.0, -2.0, -3.0], [0.0, 2.0, 2.0]),
    ];
    let tail = |cutpoints: [f64; 3], scores: [f64; 3]| TailFit {
        predominant: Some(Group::Case),
        cutpoints: cutpoints.to_vec(),
        exceed_ratios: vec![0.0; 3],
        exceed_scores: scores.iter().map(|&s| s != 0.0).collect(),
        interval_scores: scores.to_vec(),
    };
    let biomarkers = table
        .iter()
        .enumerate()
        .map(|(k, (l, r))| {
            BiomarkerFit::new(format!("b{}", k + 1), tail([424.0, 372.0, 273.0], *l), tail([644.0, 713.0, 880.0], *r))
        })
        .collect();
    let fit = FittedQbp::new(QbpConfig::default(), biomarkers).map_err(|e| e.to_string())?;
    // Representative values for L3, L2, L1, central, R1, R2, R3.
    let at = [200.0, 300.0, 400.0, 500.0, 650.0, 750.0, 900.0];
    let subject = |intervals: [usize; 5]| intervals.map(|i| at[i]);
    let tds = [
        fit.total_disease_score(&subject([1, 3, 3, 5, 5])),
        fit.total_disease_score(&subject([3, 4, 4, 2, 3])),
        fit.total_disease_score(&subject([4, 2, 3, 0, 1])),
    ];
    ensure(tds == [3.0, 0.0, -7.0], format!("TDS (a, b, c) = {tds:?}"))
}

fn null_design(pool: &Pool) -> Outcome {
    let means = mean_aucs(&benchmark("1", &Method::ALL, 50, pool));
    let ok = means.len() == Method::ALL.len() && means.iter().all(|&(_, a)| (0.48..=0.52).contains(&a));
    ensure(ok, show(&means))
}

fn variance_shift(pool: &Pool) -> Outcome {
    let means = mean_aucs(&benchmark("4", &Method::ALL, 50, pool));
    let get = |m: Method| means.iter().find(|(x, _)| *x == m).unwrap().1;
    let qbp = get(Method::Qbp);
    let blind = [
        Method::Lr,
        Method::PlrLasso,
        Method::PlrEn,
        Method::PlrRidge,
        Method::Pclr,
        Method::Lda,
        Method::PlsLda,
    ];
    let ok = qbp >= 0.58
        && blind.iter().all(|&m| (get(m) - 0.5).abs() <= 0.02)
        && means.iter().all(|&(m, a)| m == Method::Qbp || a < qbp);
    ensure(ok, show(&means))
}

fn mean_shift(pool: &Pool) -> Outcome {
    let means = mean_aucs(&benchmark("3", &Method::ALL, 50, pool));
    let get = |m: Method| means.iter().find(|(x, _)| *x == m).unwrap().1;
    let qbp = get(Method::Qbp);
    let best_other = means.iter().filter(|(m, _)| *m != Method::Qbp).map(|&(_, a)| a).fold(f64::MIN, f64::max);
    let ok = get(Method::Lda) >= 0.95 && get(Method::PlsLda) >= 0.95 && qbp < best_other && best_other - qbp <= 0.06;
    ensure(ok, format!("{}; gap to best {:.4}", show(&means), best_other - qbp))
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst: f64 = 0.0;
    let mut min_tied: f64 = 1.0;
    for _ in 0..1000 {
        let n = rng.random_range(10..200);
        let levels = rng.random_range(2..=(n / 3).max(2));
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels as u32)) * 0.25).collect();
        let tied = {
            let mut seen = std::collections::HashMap::new();
            scores.iter().for_each(|s| *seen.entry(s.to_bits()).or_insert(0usize) += 1);
            seen.values().filter(|&&c| c > 1).sum::<usize>() as f64 / n as f64
        };
        min_tied = min_tied.min(tied);
        let a = auc(&scores, &labels).map_err(|e| e.to_string())?;
        let b = auc_rank(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(
        worst <= 1e-12 && min_tied >= 0.3,
        format!("max |trapezoid - rank| = {worst:.1e}, smallest tied fraction {min_tied:.2}"),
    )
}

fn logistic_data(seed: u64, n: usize, r: usize) -> (Dataset, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..r).map(|_| rng.random_range(-0.8..0.8)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..r).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|x| {
            let eta: f64 = 0.3 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))
        })
        .collect();
    let y = labels.iter().map(|&l| f64::from(l)).collect();
    (Dataset::from_rows(&rows, labels).unwrap(), rows, y)
}

fn penalized_correctness() -> Outcome {
    let (mut coef_diff, mut grad_max, mut fd_rel, mut zero_slope): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..20 {
        let (ds, rows, y) = logistic_data(MASTER_SEED + seed, 200, 10);
        let mle = fit_logistic(&ds).map_err(|e| e.to_string())?;
        let cd = fit_penalized_logistic(&ds, Penalty::Lasso, 0.0, 1.0).map_err(|e| e.to_string())?;
        coef_diff = coef_diff.max((mle.intercept - cd.intercept).abs());
        for (a, b) in mle.coefficients.iter().zip(&cd.coefficients) {
            coef_diff = coef_diff.max((a - b).abs());
        }
        let g = log_likelihood_gradient(&rows, &y, mle.intercept, &mle.coefficients);
        grad_max = grad_max.max(g.iter().fold(0.0, |m, v| m.max(v.abs())));
        // Finite differences away from the optimum, where the gradient is not tiny.
        let mut theta: Vec<f64> = std::iter::once(mle.intercept).chain(mle.coefficients.iter().copied()).collect();
        theta.iter_mut().enumerate().for_each(|(j, t)| *t += 0.1 * ((j % 3) as f64 - 1.0) + 0.05);
        let ll = |t: &[f64]| log_likelihood(&rows, &y, t[0], &t[1..]);
        let g = log_likelihood_gradient(&rows, &y, theta[0], &theta[1..]);
        for j in 0..theta.len() {
            let h = 1e-5;
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[j] += h;
            down[j] -= h;
            let numeric = (ll(&up) - ll(&down)) / (2.0 * h);
            fd_rel = fd_rel.max((numeric - g[j]).abs() / g[j].abs().max(1.0));
        }
        for (penalty, lambda) in [(Penalty::Lasso, 1e6), (Penalty::ElasticNet, 1e6), (Penalty::Ridge, 1e12)] {
            let m = fit_penalized_logistic(&ds, penalty, lambda, 0.5).map_err(|e| e.to_string())?;
            zero_slope = zero_slope.max(m.coefficients.iter().fold(0.0, |a, v| a.max(v.abs())));
        }
    }
    ensure(
        coef_diff <= 1e-6 && grad_max < 1e-6 && fd_rel <= 1e-4 && zero_slope < 1e-6,
        format!(
            "max |CD - IRLS| {coef_diff:.1e}, max |gradient at MLE| {grad_max:.1e}, \
             finite-difference rel. error {fd_rel:.1e}, largest slope at huge lambda {zero_slope:.1e}"
        ),
    )
}

fn sample_size_effect(pool: &Pool) -> Outcome {
    let accuracy = |id: &str| {
        benchmark(id, &[Method::Qbp], 30, pool).summary()[0]
            .mean_accuracy
            .expect("designs carry a relevance mask")
    };
    let (small, large) = (accuracy("7a"), accuracy("7b"));
    ensure(
        large - small >= 0.10,
        format!("selection accuracy n=100 {small:.3}, n=400 {large:.3}, gain {:.3}", large - small),
    )
}

fn csv_bytes(result: &BenchmarkResult) -> Vec<u8> {
    let mut out = Vec::new();
    write_benchmark(result, &mut out).unwrap();
    out
}

fn determinism() -> Outcome {
    let run = |threads| {
        let pool = Pool::new(Some(threads)).unwrap();
        benchmark("2", &Method::ALL, 3, &pool)
    };
    let first = csv_bytes(&run(1));
    let again = csv_bytes(&run(1));
    let sort = |r: BenchmarkResult| {
        let mut rows = r.rows;
        rows.sort_by_key(|row| (row.method, row.repetition));
        csv_bytes(&BenchmarkResult { rows, failures: r.failures })
    };
    let threaded = sort(run(4));
    let single = sort(run(1));
    ensure(
        first == again && threaded == single,
        format!(
            "same seed and threads byte-identical: {}, 1 vs 4 threads identical rows: {}",
            first == again,
            threaded == single
        ),
    )
}

/// Small two-class dataset with 1 to 3 biomarkers and some tied values.
fn small_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (1usize..4, 6usize..40, 6usize..40).prop_flat_map(|(r, n0, n1)| {
        let n = n0 + n1;
        (
            prop::collection::vec(prop::collection::vec((-40i32..40).prop_map(|v| f64::from(v) / 4.0), r), n),
            Just((0..n).map(|i| u8::from(i >= n0)).collect::<Vec<u8>>()),
            -1.5f64..1.5,
        )
            .prop_map(|(mut rows, labels, shift)| {
                for (row, &y) in rows.iter_mut().zip(&labels) {
                    row[0] += shift * f64::from(y);
                }
                (rows, labels)
            })
    })
}

/// Strictly increasing and nonlinear.
fn increasing(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|x| x.iter().map(|&v| (v / 4.0).exp() + v * v * v).collect()).collect()
}

fn in_sample_scores(rows: &[Vec<f64>], labels: &[u8], config: &QbpConfig) -> Result<Vec<f64>, TestCaseError> {
    let ds = Dataset::from_rows(rows, labels.to_vec()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let fit = fit_qbp(&ds, config).map_err(|e| TestCaseError::fail(e.to_string()))?;
    Ok(rows.iter().map(|x| fit.total_disease_score(x)).collect())
}

fn runner() -> TestRunner {
    let config = Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    };
    let seed = MASTER_SEED.to_le_bytes().repeat(4);
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed))
}

fn invariance_suite() -> Outcome {
    let config = QbpConfig::default();
    let run = |name: &str, test: &dyn Fn((Vec<Vec<f64>>, Vec<u8>)) -> Result<(), TestCaseError>| {
        runner().run(&small_dataset(), test).map_err(|e| format!("{name}: {e}"))
    };
    // Interpolated quantiles commute with increasing affine maps only, so
    // arbitrary increasing maps are checked where every quantile used is an
    // order statistic: (n − 1)·p integral for every class size n.
    run("increasing affine map", &|(rows, labels)| {
        let base = in_sample_scores(&rows, &labels, &config)?;
        let mapped: Vec<Vec<f64>> = rows.iter().map(|x| x.iter().map(|&v| 4.0 * v - 3.0).collect()).collect();
        prop_assert_eq!(base, in_sample_scores(&mapped, &labels, &config)?);
        Ok(())
    })?;
    let order_statistic_sizes = (1usize..4).prop_flat_map(|r| {
        (
            prop::collection::vec(prop::collection::vec((-40i32..40).prop_map(|v| f64::from(v) / 4.0), r), 202),
            -1.5f64..1.5,
        )
    });
    runner()
        .run(&order_statistic_sizes, |(mut rows, shift)| {
            let labels: Vec<u8> = (0..202).map(|i| u8::from(i >= 101)).collect();
            rows[101..].iter_mut().for_each(|row| row[0] += shift);
            let base = in_sample_scores(&rows, &labels, &config)?;
            prop_assert_eq!(base, in_sample_scores(&increasing(&rows), &labels, &config)?);
            Ok(())
        })
        .map_err(|e| format!("increasing map: {e}"))?;
    let kept = std::cell::Cell::new(0);
    runner()
        .run(&small_dataset(), |(rows, labels)| {
            let same = in_sample_scores(&rows, &labels, &config)? == in_sample_scores(&increasing(&rows), &labels, &config)?;
            kept.set(kept.get() + usize::from(same));
            Ok(())
        })
        .map_err(|e| format!("increasing map, general sizes: {e}"))?;
    let general_kept = kept.get();
    run("label swap", &|(rows, labels)| {
        let base = in_sample_scores(&rows, &labels, &config)?;
        let swapped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        let negated: Vec<f64> = in_sample_scores(&rows, &swapped, &config)?.iter().map(|s| -s).collect();
        prop_assert_eq!(base, negated);
        Ok(())
    })?;
    run("score magnitude", &|(rows, labels)| {
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let fit = fit_qbp(&ds, &config).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for b in &fit.biomarkers {
            for tail in [&b.left, &b.right] {
                let sign = tail.predominant.map_or(0.0, |g| g.sign());
                let v = &tail.interval_scores;
                prop_assert!(v.iter().all(|&s| s * sign >= 0.0 && (sign != 0.0 || s == 0.0)));
                prop_assert!(v.windows(2).all(|w| w[1].abs() >= w[0].abs()));
                prop_assert!(v.iter().all(|&s| s == 0.0 || config.max_scores.contains(&s.abs())));
            }
        }
        Ok(())
    })?;
    run("ROC complement", &|(rows, labels)| {
        let scores: Vec<f64> = rows.iter().map(|x| x.iter().sum()).collect();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = roc_curve(&scores, &labels).unwrap();
        let b = roc_curve(&negated, &labels).unwrap();
        prop_assert!((a.auc + b.auc - 1.0).abs() < 1e-12);
        let mirrored: Vec<(f64, f64)> = a.points.iter().rev().map(|&(f, t)| (1.0 - f, 1.0 - t)).collect();
        prop_assert_eq!(mirrored.len(), b.points.len());
        for (p, q) in mirrored.iter().zip(&b.points) {
            prop_assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
        }
        Ok(())
    })?;
    Ok(format!(
        "affine maps, increasing maps at order-statistic sizes, label swap, score magnitude and ROC \
         complement: 200 instances each; increasing maps at arbitrary sizes leave all scores unchanged \
         in {general_kept}/200 instances"
    ))
}

fn main() {
    let pool = Pool::new(None).expect("thread pool");
    let only = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut suite = Suite { failed: 0, only };
    let second = Some(Duration::from_secs(1));
    suite.run(1, "worked-example tail characteristics", second, worked_example);
    suite.run(2, "worked-example subject scores", second, subject_scoring);
    suite.run(3, "null design unbiasedness (design 1, 50 reps)", None, || null_design(&pool));
    suite.run(4, "variance-shift ordering (design 4, 50 reps)", None, || variance_shift(&pool));
    suite.run(5, "mean-shift ordering (design 3, 50 reps)", None, || mean_shift(&pool));
    suite.run(6, "trapezoid AUC equals rank statistic", None, auc_oracle);
    suite.run(7, "penalized logistic correctness", None, penalized_correctness);
    suite.run(8, "sample-size effect on QBP selection (7a vs 7b)", None, || sample_size_effect(&pool));
    suite.run(9, "determinism across reruns and thread counts", None, determinism);
    suite.run(10, "invariance suite", None, invariance_suite);
    println!("{} of 10 criteria failed", suite.failed);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
