use ndarray::{Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{EnsembleAxis, EstimatorSpec, ImportanceVector};
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, kernel_row_sums};
use crate::rng::RngStream;
use crate::solver::{solve_box_sum_qp, QpProblem, SolverReport};

/// `(√n − 1)/√n`.
pub fn default_epsilon(n_tr: usize) -> f64 {
    let r = (n_tr as f64).sqrt();
    (r - 1.0) / r
}

/// Builds and solves the KMM quadratic program, returning the raw report.
pub fn kmm_solve(v_tr: ArrayView2<'_, f64>, v_te: ArrayView2<'_, f64>, spec: &EstimatorSpec) -> Result<SolverReport> {
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
    let entries = n_tr.saturating_mul(n_tr);
    if entries > spec.max_kernel_entries {
        return Err(Error::MemoryBudget {
            entries,
            budget: spec.max_kernel_entries,
        });
    }
    let kernel = spec.kernel_config();
    let h = kernel_matrix(v_tr, v_tr, &kernel)?;
    let c = kernel_row_sums(v_tr, v_te, &kernel)? * (n_tr as f64 / n_te as f64);
    let epsilon = spec.epsilon.unwrap_or_else(|| default_epsilon(n_tr));
    let scale = c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let problem = QpProblem {
        h,
        c,
        upper: spec.upper_bound,
        sum_target: n_tr as f64,
        sum_slack: epsilon,
    };
    solve_box_sum_qp(&problem, spec.qp_tol * scale, spec.qp_max_iter)
}

/// Kernel mean matching: weights that bring the reweighted training kernel
/// mean closest to the test kernel mean.
pub fn kmm_importance(v_tr: ArrayView2<'_, f64>, v_te: ArrayView2<'_, f64>, spec: &EstimatorSpec) -> Result<ImportanceVector> {
    let report = kmm_solve(v_tr, v_te, spec)?.require_converged()?;
    ImportanceVector::new(Array1::from(report.solution))
}

/// Random disjoint partition of `0..n` into `parts` near-equal groups, each
/// sorted ascending.
pub fn partition_indices(n: usize, parts: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if parts == 0 || parts > n {
        return Err(Error::PartitionTooFine { parts, items: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        let mut group = idx[start..start + len].to_vec();
        group.sort_unstable();
        out.push(group);
        start += len;
    }
    Ok(out)
}

/// Ensemble KMM over a random partition of either the test or the training rows.
pub fn ekmm_importance(
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<ImportanceVector> {
    let (n_tr, n_te) = (v_tr.nrows(), v_te.nrows());
    match spec.ensemble_axis {
        EnsembleAxis::TestPartition => {
            let parts = partition_indices(n_te, spec.partitions, rng)?;
            let mut total = Array1::<f64>::zeros(n_tr);
            for part in &parts {
                let shard = v_te.select(Axis(0), part);
                let w = kmm_importance(v_tr, shard.view(), spec)?;
                let share = part.len() as f64 / n_te as f64;
                total.scaled_add(share, w.weights());
            }
            ImportanceVector::new(total)
        }
        EnsembleAxis::TrainPartition => {
            let parts = partition_indices(n_tr, spec.partitions, rng)?;
            let mut total = Array1::<f64>::zeros(n_tr);
            for part in &parts {
                let shard = v_tr.select(Axis(0), part);
                let w = kmm_importance(shard.view(), v_te, spec)?;
                for (&row, &wi) in part.iter().zip(w.weights()) {
                    total[row] = wi;
                }
            }
            ImportanceVector::new(total)
        }
    }
}
