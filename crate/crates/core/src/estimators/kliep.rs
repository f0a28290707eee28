use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::{EstimatorSpec, ImportanceVector};
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, KernelConfig};
use crate::rng::RngStream;
use crate::solver::{kliep_ascent, SolverReport};

/// Everything produced while fitting KLIEP, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct KliepFit {
    pub weights: ImportanceVector,
    pub sigma: f64,
    pub alpha: Array1<f64>,
    /// Indices of the test rows used as basis centers, ascending.
    pub centers: Vec<usize>,
    pub report: SolverReport,
    /// Mean held-out log-weight per grid entry, in grid order.
    pub cv_scores: Vec<(f64, f64)>,
}

fn basis(points: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>, sigma: f64) -> Result<Array2<f64>> {
    kernel_matrix(points, centers, &KernelConfig::gaussian(sigma))
}

// Pooled mean held-out log w over test folds; -∞ when any fold fails.
fn cv_score(
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    centers: ArrayView2<'_, f64>,
    folds: &[usize],
    n_folds: usize,
    sigma: f64,
    spec: &EstimatorSpec,
) -> f64 {
    let score = || -> Result<f64> {
        let a_tr = basis(v_tr, centers, sigma)?;
        let a_te = basis(v_te, centers, sigma)?;
        let mut total = 0.0;
        let mut count = 0usize;
        for fold in 0..n_folds {
            let fit_rows: Vec<usize> = (0..folds.len()).filter(|&j| folds[j] != fold).collect();
            let held: Vec<usize> = (0..folds.len()).filter(|&j| folds[j] == fold).collect();
            if held.is_empty() {
                continue;
            }
            let a_fit = a_te.select(Axis(0), &fit_rows);
            let (alpha, _) = kliep_ascent(a_tr.view(), a_fit.view(), spec.kliep_tol, spec.kliep_max_iter)?;
            let w_held = a_te.select(Axis(0), &held).dot(&alpha);
            total += w_held.iter().map(|w| w.ln()).sum::<f64>();
            count += held.len();
        }
        Ok(total / count as f64)
    };
    match score() {
        Ok(s) if !s.is_nan() => s,
        _ => f64::NEG_INFINITY,
    }
}

/// Fits KLIEP: Gaussian basis at randomly chosen test rows, bandwidth picked
/// by likelihood cross-validation over test folds.
pub fn kliep_fit(
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<KliepFit> {
    let (n_tr, n_te) = (v_tr.nrows(), v_te.nrows());
    if n_tr == 0 || n_te == 0 {
        return Err(Error::EmptyDataset);
    }
    if v_tr.ncols() != v_te.ncols() {
        return Err(Error::DimensionMismatch {
            expected: v_tr.ncols(),
            found: v_te.ncols(),
        });
    }
    if n_te < 2 {
        return Err(Error::InsufficientData("likelihood cross-validation needs at least two test rows".into()));
    }
    let b = spec.basis_count.min(n_te);
    let mut centers = sample(&mut rng.child("centers"), n_te, b).into_vec();
    centers.sort_unstable();
    let center_rows = v_te.select(Axis(0), &centers);

    let n_folds = spec.kliep_folds.min(n_te);
    let mut order: Vec<usize> = (0..n_te).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng.child("folds"));
    let mut folds = vec![0usize; n_te];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % n_folds;
    }

    let mut grid = spec.sigma_grid.clone();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let cv_scores: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&sigma| (sigma, cv_score(v_tr, v_te, center_rows.view(), &folds, n_folds, sigma, spec)))
        .collect();

    // Ascending grid with strict improvement keeps the smallest σ on ties.
    let mut best: Option<(f64, f64)> = None;
    for &(sigma, score) in &cv_scores {
        if score.is_finite() && best.is_none_or(|(_, s)| score > s) {
            best = Some((sigma, score));
        }
    }
    let Some((sigma, _)) = best else {
        return Err(Error::DegenerateBasis(0));
    };

    let a_tr = basis(v_tr, center_rows.view(), sigma)?;
    let a_te = basis(v_te, center_rows.view(), sigma)?;
    let (alpha, report) = kliep_ascent(a_tr.view(), a_te.view(), spec.kliep_tol, spec.kliep_max_iter)?;
    let report = report.require_converged()?;
    let weights = ImportanceVector::new(a_tr.dot(&alpha))?;
    Ok(KliepFit {
        weights,
        sigma,
        alpha,
        centers,
        report,
        cv_scores,
    })
}

pub fn kliep_importance(
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<ImportanceVector> {
    Ok(kliep_fit(v_tr, v_te, spec, rng)?.weights)
}
