//! Importance-weighted cross-validation and the distance between estimated
//! and actual test error.
//!
//! The training set is shared by every test variant of a seed, so the fold
//! assignment, the cross-validated per-example errors and the full-train model
//! are computed once in a [`TrainBaseline`] and reused for each variant.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorSpec, ImportanceVector};
use crate::learners::{fit, per_example_error, LearnerConfig, LinearModel};
use crate::rng::RngStream;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub weighted: f64,
    pub unweighted: f64,
    pub folds: usize,
    pub errors: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub actual_error: f64,
    pub weighted_estimate: f64,
    pub unweighted_estimate: f64,
    pub distance_weighted: f64,
    pub distance_unweighted: f64,
}

/// Fold id per training row. Classification folds are stratified: rows of
/// each class are shuffled and dealt round-robin, continuing across classes.
pub fn cv_fold_assignment(data: &Dataset, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let n = data.len();
    if k < 2 || k > n {
        return Err(Error::FoldTooSmall {
            fold: k,
            reason: format!("fold count must be in [2, {n}]"),
        });
    }
    let mut folds = vec![0usize; n];
    match data.task() {
        Task::Regression => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            for (pos, &row) in order.iter().enumerate() {
                folds[row] = pos % k;
            }
        }
        Task::Classification { classes } => {
            let labels = data.labels();
            let mut next = 0usize;
            for c in 0..classes {
                let mut rows: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if rows.len() == 1 {
                    // Holding out the single example would leave its class out of training.
                    return Err(Error::FoldTooSmall {
                        fold: next % k,
                        reason: format!("class {c} has a single example"),
                    });
                }
                rows.shuffle(rng);
                for row in rows {
                    folds[row] = next % k;
                    next += 1;
                }
            }
        }
    }
    Ok(folds)
}

/// Held-out per-example errors for a fixed fold assignment.
pub fn cv_errors(train: &Dataset, folds: &[usize], k: usize, cfg: &LearnerConfig) -> Result<Vec<f64>> {
    if folds.len() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: folds.len(),
        });
    }
    let per_fold: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let fit_rows: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
            let held: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
            if held.is_empty() {
                return Err(Error::FoldTooSmall {
                    fold,
                    reason: "empty held-out fold".into(),
                });
            }
            let model = fit(&train.select(&fit_rows), cfg)?;
            let errs = per_example_error(&model, &train.select(&held))?;
            Ok((held, errs))
        })
        .collect();
    let mut ee = vec![0.0; train.len()];
    for result in per_fold {
        let (held, errs) = result?;
        for (i, e) in held.into_iter().zip(errs) {
            ee[i] = e;
        }
    }
    Ok(ee)
}

/// `Σ ee·w / Σ w`.
pub fn weighted_estimate(errors: &[f64], weights: &[f64]) -> Result<f64> {
    if errors.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: errors.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("importance weights sum to zero".into()));
    }
    let num: f64 = errors.iter().zip(weights).map(|(e, w)| e * w).sum();
    Ok(num / total)
}

fn plain_mean(errors: &[f64]) -> f64 {
    errors.iter().sum::<f64>() / errors.len() as f64
}

pub fn weighted_cv(
    train: &Dataset,
    w: &ImportanceVector,
    k: usize,
    cfg: &LearnerConfig,
    rng: &mut RngStream,
) -> Result<ErrorEstimate> {
    if w.len() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: w.len(),
        });
    }
    let folds = cv_fold_assignment(train, k, rng)?;
    let errors = cv_errors(train, &folds, k, cfg)?;
    let weights = w.weights().to_vec();
    Ok(ErrorEstimate {
        weighted: weighted_estimate(&errors, &weights)?,
        unweighted: plain_mean(&errors),
        folds: k,
        errors,
        weights,
    })
}

/// Mean 0/1 loss or mean squared error on `test` of a model fit on all of `train`.
pub fn actual_error(train: &Dataset, test: &Dataset, cfg: &LearnerConfig) -> Result<f64> {
    let model = fit(train, cfg)?;
    Ok(plain_mean(&per_example_error(&model, test)?))
}

/// Per-seed state shared by every test variant of one training set.
#[derive(Debug, Clone)]
pub struct TrainBaseline {
    pub folds: Vec<usize>,
    pub errors: Vec<f64>,
    pub model: LinearModel,
}

impl TrainBaseline {
    /// Folds come from `rng.child("folds")`, so they depend only on the stream.
    pub fn fit(train: &Dataset, cfg: &LearnerConfig, k: usize, rng: &RngStream) -> Result<Self> {
        let folds = cv_fold_assignment(train, k, &mut rng.child("folds"))?;
        let errors = cv_errors(train, &folds, k, cfg)?;
        let model = fit(train, cfg)?;
        Ok(Self { folds, errors, model })
    }

    pub fn unweighted(&self) -> f64 {
        plain_mean(&self.errors)
    }

    pub fn actual_error(&self, test: &Dataset) -> Result<f64> {
        Ok(plain_mean(&per_example_error(&self.model, test)?))
    }

    /// Scores importance weights already computed for `test`.
    pub fn score(&self, test: &Dataset, w: &ImportanceVector) -> Result<EvalResult> {
        let actual = self.actual_error(test)?;
        let weighted = weighted_estimate(&self.errors, w.weights().as_slice().expect("contiguous"))?;
        let unweighted = self.unweighted();
        Ok(EvalResult {
            actual_error: actual,
            weighted_estimate: weighted,
            unweighted_estimate: unweighted,
            distance_weighted: (weighted - actual).abs(),
            distance_unweighted: (unweighted - actual).abs(),
        })
    }

    /// Estimates importance with `rng.child("estimate")` and scores it.
    pub fn evaluate(&self, train: &Dataset, test: &Dataset, spec: &EstimatorSpec, rng: &RngStream) -> Result<EvalResult> {
        let w = estimate(spec, train, test.covariates(), &rng.child("estimate"))?;
        self.score(test, &w)
    }
}

/// Full pipeline for a single (train, test) pair.
pub fn evaluate_pair(
    train: &Dataset,
    test: &Dataset,
    spec: &EstimatorSpec,
    cfg: &LearnerConfig,
    k: usize,
    rng: &RngStream,
) -> Result<EvalResult> {
    TrainBaseline::fit(train, cfg, k, rng)?.evaluate(train, test, spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    #[test]
    fn uniform_and_indicator_weights() {
        let ee = [0.0, 1.0, 0.25, 4.0];
        assert_eq!(weighted_estimate(&ee, &[1.0; 4]).unwrap(), plain_mean(&ee));
        assert_eq!(weighted_estimate(&ee, &[0.0, 0.0, 1.0, 0.0]).unwrap(), 0.25);
        assert!(weighted_estimate(&ee, &[0.0; 4]).is_err());
    }

    #[test]
    fn constant_model_mse() {
        let train = Dataset::regression(array![[0.0], [0.0]], array![1.0, 3.0]).unwrap();
        let test = Dataset::regression(array![[0.0], [0.0]], array![1.0, 3.0]).unwrap();
        let e = actual_error(&train, &test, &LearnerConfig::with_lambda(1.0)).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolating_ridge_has_zero_error() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]];
        let y = x.dot(&array![2.0, -1.0]) + 0.5;
        let data = Dataset::regression(x, y).unwrap();
        let e = actual_error(&data, &data, &LearnerConfig::with_lambda(0.0)).unwrap();
        assert!(e < 1e-20);
    }

    #[test]
    fn stratified_folds_partition_rows() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((30, 1), |(i, _)| i as f64);
        let data = Dataset::classification(x, &labels, 3).unwrap();
        let folds = cv_fold_assignment(&data, 10, &mut RngStream::new(0)).unwrap();
        for f in 0..10 {
            let rows: Vec<usize> = (0..30).filter(|&i| folds[i] == f).collect();
            assert_eq!(rows.len(), 3);
        }
    }

    #[test]
    fn weighted_cv_uniform_matches_plain_mean() {
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0);
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]] - x[[i, 1]] + ((i % 5) as f64 - 2.0) * 0.1);
        let data = Dataset::regression(x, y).unwrap();
        let est = weighted_cv(&data, &ImportanceVector::uniform(n), 10, &LearnerConfig::default(), &mut RngStream::new(1)).unwrap();
        assert_eq!(est.weighted, est.unweighted);
    }
}
