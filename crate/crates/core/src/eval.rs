//! Evaluation harness: rank and linear correlations, the five-parameter
//! logistic mapping applied before PLCC/RMSE, and the repeated
//! content-aware split protocol with median/std aggregation.

use log::warn;
use rayon::prelude::*;

use crate::config::RegressorConfig;
use crate::error::{Error, Result};
use crate::forest::{self, SplitSpec};
use crate::optim::{nelder_mead, SimplexOptions};

/// Average ranks, 1-based; tied values share the mean of their ranks.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = shared;
        }
        i = j + 1;
    }
    out
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::TooSmall(format!(
            "correlation needs at least 3 samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "correlation of a constant vector is undefined".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson on average-ranked data.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    plcc(&ranks(x), &ranks(y))
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    let se: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((se / a.len() as f64).sqrt())
}

/// l(s) = (b1 - b2) / (1 + exp(-(s - b3) / b4)) + b5.
pub fn logistic5(s: f64, beta: &[f64; 5]) -> f64 {
    (beta[0] - beta[1]) / (1.0 + (-(s - beta[2]) / beta[3]).exp()) + beta[4]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: [f64; 5],
    pub fitted: Vec<f64>,
    pub rmse: f64,
    pub converged: bool,
}

/// Least-squares fit of the five-parameter logistic from predictions to
/// subjective scores. Non-convergence returns the best simplex point
/// with the flag cleared and a warning, never an error.
pub fn fit_logistic5(pred: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    if pred.len() != mos.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} scores",
            pred.len(),
            mos.len()
        )));
    }
    if pred.len() < 6 {
        return Err(Error::TooSmall(format!(
            "logistic fit needs at least 6 samples, got {}",
            pred.len()
        )));
    }
    let n = pred.len() as f64;
    let p_mean = pred.iter().sum::<f64>() / n;
    let p_var = pred.iter().map(|v| (v - p_mean) * (v - p_mean)).sum::<f64>() / n;
    if p_var == 0.0 {
        return Err(Error::DegenerateInput(
            "constant predictions cannot be fitted".into(),
        ));
    }
    let hi = mos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = mos.iter().cloned().fold(f64::INFINITY, f64::min);
    let x0 = vec![hi, lo, p_mean, p_var.sqrt() / 4.0, 0.0];
    let sse = |b: &[f64]| -> f64 {
        let beta = [b[0], b[1], b[2], b[3], b[4]];
        pred.iter()
            .zip(mos)
            .map(|(&s, &m)| {
                let e = logistic5(s, &beta) - m;
                e * e
            })
            .sum()
    };
    let opts = SimplexOptions {
        max_iters: 2000,
        rel_tol: 1e-8,
    };
    let result = nelder_mead(&sse, &x0, &opts);
    if !result.converged {
        warn!(
            "logistic fit stopped at iteration cap (sse {:.6})",
            result.value
        );
    }
    let beta = [result.x[0], result.x[1], result.x[2], result.x[3], result.x[4]];
    let fitted: Vec<f64> = pred.iter().map(|&s| logistic5(s, &beta)).collect();
    let fit_rmse = rmse(&fitted, mos)?;
    Ok(LogisticFit {
        beta,
        fitted,
        rmse: fit_rmse,
        converged: result.converged,
    })
}

/// Sorted-order median; empty input yields NaN.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation (n - 1); zero below two samples.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// One test-set video in one trial: raw prediction, logistic-fitted
/// prediction, and the subjective target, for external scatter plots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub video: usize,
    pub prediction: f64,
    pub fitted: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Rank correlation of raw predictions against targets.
    pub srcc: f64,
    /// Linear correlation of logistic-fitted predictions against targets.
    pub plcc: f64,
    pub rmse: f64,
    pub beta: [f64; 5],
    pub fit_converged: bool,
    pub points: Vec<ScatterPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Ok(TrialResult),
    Failed { trial: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// One outcome per trial, in trial order.
    pub outcomes: Vec<TrialOutcome>,
    pub n_failed: usize,
    pub srcc: Summary,
    pub plcc: Summary,
    pub rmse: Summary,
}

impl MetricReport {
    pub fn successes(&self) -> impl Iterator<Item = &TrialResult> {
        self.outcomes.iter().filter_map(|o| match o {
            TrialOutcome::Ok(r) => Some(r),
            TrialOutcome::Failed { .. } => None,
        })
    }
}

fn run_trial(
    x: &[Vec<f64>],
    y: &[f64],
    split: &SplitSpec,
    cfg: &RegressorConfig,
    layout: &str,
    seed: u64,
) -> Result<TrialResult> {
    let train_x: Vec<Vec<f64>> = split.train.iter().map(|&i| x[i].clone()).collect();
    let train_y: Vec<f64> = split.train.iter().map(|&i| y[i]).collect();
    let model = forest::train_forest(&train_x, &train_y, cfg, layout, seed)?;
    let test_x: Vec<Vec<f64>> = split.test.iter().map(|&i| x[i].clone()).collect();
    let test_y: Vec<f64> = split.test.iter().map(|&i| y[i]).collect();
    let pred = model.predict(&test_x, layout)?;
    let srcc_raw = srcc(&pred, &test_y)?;
    let fit = fit_logistic5(&pred, &test_y)?;
    let plcc_fitted = plcc(&fit.fitted, &test_y)?;
    let points = split
        .test
        .iter()
        .zip(pred.iter().zip(&fit.fitted))
        .map(|(&video, (&prediction, &fitted))| ScatterPoint {
            video,
            prediction,
            fitted,
            target: y[video],
        })
        .collect();
    Ok(TrialResult {
        trial: split.trial,
        srcc: srcc_raw,
        plcc: plcc_fitted,
        rmse: fit.rmse,
        beta: fit.beta,
        fit_converged: fit.converged,
        points,
    })
}

/// Run the full repeated-split protocol: per trial, cross-validated
/// forest training on the train side, prediction on the test side, SRCC
/// on raw predictions, PLCC and RMSE on logistic-fitted ones. Failed
/// trials are excluded from the aggregates and counted.
pub fn evaluate_splits(
    x: &[Vec<f64>],
    y: &[f64],
    splits: &[SplitSpec],
    cfg: &RegressorConfig,
    layout: &str,
    seed: u64,
) -> Result<MetricReport> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if splits.is_empty() {
        return Err(Error::InvalidConfig("no splits supplied".into()));
    }
    let outcomes: Vec<TrialOutcome> = splits
        .par_iter()
        .map(|split| match run_trial(x, y, split, cfg, layout, seed) {
            Ok(r) => TrialOutcome::Ok(r),
            Err(e) => {
                warn!("trial {} failed: {e}", split.trial);
                TrialOutcome::Failed {
                    trial: split.trial,
                    reason: e.to_string(),
                }
            }
        })
        .collect();
    let n_failed = outcomes
        .iter()
        .filter(|o| matches!(o, TrialOutcome::Failed { .. }))
        .count();
    let collect = |f: fn(&TrialResult) -> f64| -> Vec<f64> {
        outcomes
            .iter()
            .filter_map(|o| match o {
                TrialOutcome::Ok(r) => Some(f(r)),
                TrialOutcome::Failed { .. } => None,
            })
            .collect()
    };
    let srcc_v = collect(|r| r.srcc);
    let plcc_v = collect(|r| r.plcc);
    let rmse_v = collect(|r| r.rmse);
    let summary = |v: &[f64]| Summary {
        median: median(v),
        std: sample_std(v),
    };
    Ok(MetricReport {
        outcomes,
        n_failed,
        srcc: summary(&srcc_v),
        plcc: summary(&plcc_v),
        rmse: summary(&rmse_v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MaxFeatures;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranks_share_tie_means() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn srcc_endpoints_and_hand_example() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 2.0 + 1.0).collect();
        assert!((srcc(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((srcc(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // d^2 sums to 6: rho = 1 - 36/24 = -0.5.
        let got = srcc(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert!((got + 0.5).abs() < 1e-12);
    }

    #[test]
    fn srcc_ignores_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let base = srcc(&x, &y).unwrap();
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let exp_y: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        assert!((srcc(&cubed, &y).unwrap() - base).abs() < 1e-12);
        assert!((srcc(&x, &exp_y).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn constant_vector_is_an_error() {
        let x = vec![1.0, 1.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(srcc(&x, &y), Err(Error::DegenerateInput(_))));
        assert!(matches!(plcc(&x, &y), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn logistic_recovery_from_known_parameters() {
        let beta = [90.0, 10.0, 50.0, 10.0, 5.0];
        let pred: Vec<f64> = (0..30).map(|i| 20.0 + 2.0 * i as f64).collect();
        let mos: Vec<f64> = pred.iter().map(|&s| logistic5(s, &beta)).collect();
        let fit = fit_logistic5(&pred, &mos).unwrap();
        for (f, m) in fit.fitted.iter().zip(&mos) {
            assert!((f - m).abs() < 1e-3, "{f} vs {m}");
        }
        assert!(fit.rmse < 1e-3);
    }

    #[test]
    fn affine_data_keeps_linear_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pred: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mos: Vec<f64> = pred.iter().map(|v| 3.0 * v + 7.0).collect();
        let before = plcc(&pred, &mos).unwrap();
        let fit = fit_logistic5(&pred, &mos).unwrap();
        let after = plcc(&fit.fitted, &mos).unwrap();
        assert!(after >= before - 1e-9, "{after} < {before}");
    }

    #[test]
    fn fitted_rmse_beats_constant_predictor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pred: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..5.0)).collect();
        let mos: Vec<f64> = pred
            .iter()
            .map(|v| 10.0 * v + rng.gen_range(-2.0..2.0))
            .collect();
        let fit = fit_logistic5(&pred, &mos).unwrap();
        let mean = mos.iter().sum::<f64>() / mos.len() as f64;
        let constant = rmse(&vec![mean; mos.len()], &mos).unwrap();
        assert!(fit.rmse <= constant + 1e-9);
    }

    #[test]
    fn constant_predictions_cannot_be_fitted() {
        let pred = vec![2.0; 10];
        let mos: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            fit_logistic5(&pred, &mos),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn median_and_std_match_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1usize, 2, 5, 8, 13] {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let expect = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            assert_eq!(median(&v), expect);
            if n >= 2 {
                let mean = v.iter().sum::<f64>() / n as f64;
                let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
                assert!((sample_std(&v) - (ss / (n as f64 - 1.0)).sqrt()).abs() < 1e-12);
            }
        }
    }

    fn synthetic_corpus(seed: u64, n: usize, leak: bool) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut contents = Vec::with_capacity(n);
        for i in 0..n {
            let target = rng.gen_range(0.0..100.0);
            let mut row: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if leak {
                row[0] = target;
            }
            x.push(row);
            y.push(target);
            contents.push(format!("content{}", i % 10));
        }
        (x, y, contents)
    }

    fn small_grid() -> RegressorConfig {
        RegressorConfig {
            n_estimators: vec![20],
            max_features: vec![MaxFeatures::All],
            cv_folds: 3,
        }
    }

    #[test]
    fn leaked_targets_evaluate_near_perfectly() {
        let (x, y, contents) = synthetic_corpus(11, 120, true);
        let splits = forest::make_splits(&contents, 0.8, 8, 3).unwrap();
        let report = evaluate_splits(&x, &y, &splits, &small_grid(), "t", 3).unwrap();
        assert_eq!(report.outcomes.len(), 8);
        assert_eq!(report.n_failed, 0);
        assert!(report.srcc.median > 0.99, "{}", report.srcc.median);
    }

    #[test]
    fn shuffled_targets_evaluate_near_zero() {
        let (x, mut y, contents) = synthetic_corpus(12, 200, true);
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
        let splits = forest::make_splits(&contents, 0.8, 8, 4).unwrap();
        let report = evaluate_splits(&x, &y, &splits, &small_grid(), "t", 4).unwrap();
        assert!(report.srcc.median.abs() < 0.2, "{}", report.srcc.median);
    }
}
