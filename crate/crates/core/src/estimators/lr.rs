use ndarray::{concatenate, ArrayView2, Axis};

use super::ImportanceVector;
use crate::error::{Error, Result};
use crate::learners::{fit_binary_logistic, sigmoid, LearnerConfig};

/// Lower bound applied to `P(train | x)` before dividing.
pub const LR_PROBABILITY_FLOOR: f64 = 1e-6;

/// `n_tr · P(test|x) / (n_te · max(P(train|x), floor))`.
pub fn lr_weight(p_test: f64, p_train: f64, n_tr: usize, n_te: usize) -> f64 {
    (n_tr as f64 * p_test) / (n_te as f64 * p_train.max(LR_PROBABILITY_FLOOR))
}

/// Discriminative estimate: a logistic model separates training rows
/// (negative) from test rows (positive) and its odds give the weight.
pub fn lr_importance(v_tr: ArrayView2<'_, f64>, v_te: ArrayView2<'_, f64>, lambda: f64) -> Result<ImportanceVector> {
    if v_tr.ncols() != v_te.ncols() {
        return Err(Error::DimensionMismatch {
            expected: v_tr.ncols(),
            found: v_te.ncols(),
        });
    }
    let (n_tr, n_te) = (v_tr.nrows(), v_te.nrows());
    if n_tr == 0 || n_te == 0 {
        return Err(Error::EmptyDataset);
    }
    let stacked = concatenate(Axis(0), &[v_tr, v_te]).expect("column counts agree");
    let is_test: Vec<bool> = (0..n_tr + n_te).map(|i| i >= n_tr).collect();
    let fit = fit_binary_logistic(stacked.view(), &is_test, &LearnerConfig::with_lambda(lambda))?;
    let z = v_tr.dot(&fit.weights) + fit.bias;
    let w = z.mapv(|zi| lr_weight(sigmoid(zi), sigmoid(-zi), n_tr, n_te));
    ImportanceVector::new(w)
}
