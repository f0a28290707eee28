use std::f64::consts::PI;

use ndarray::{Array1, ArrayView2};

use super::{EstimatorSpec, ImportanceVector};
use crate::error::{Error, Result};
use crate::kernels::{kernel_row_sums, KernelConfig, KernelFamily};

const DENSITY_FLOOR: f64 = 1e-300;

fn normalizer(cfg: &KernelConfig, d: usize) -> f64 {
    let s = cfg.bandwidth;
    match cfg.family {
        KernelFamily::Gaussian => (2.0 * PI * s * s).powf(d as f64 / 2.0),
        KernelFamily::Epanechnikov => s.powi(d as i32),
    }
}

/// Training and test density estimates, both evaluated at the training rows.
pub fn kde_densities(
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    kernel: &KernelConfig,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (n_tr, n_te) = (v_tr.nrows(), v_te.nrows());
    if n_tr == 0 || n_te == 0 {
        return Err(Error::EmptyDataset);
    }
    let norm = normalizer(kernel, v_tr.ncols());
    let p_tr = kernel_row_sums(v_tr, v_tr, kernel)? / (n_tr as f64 * norm);
    let p_te = kernel_row_sums(v_tr, v_te, kernel)? / (n_te as f64 * norm);
    Ok((p_tr, p_te))
}

/// Ratio of kernel density estimates `p̂_te / p̂_tr` at each training row.
pub fn kde_importance(v_tr: ArrayView2<'_, f64>, v_te: ArrayView2<'_, f64>, spec: &EstimatorSpec) -> Result<ImportanceVector> {
    let (p_tr, p_te) = kde_densities(v_tr, v_te, &spec.kernel_config())?;
    let w = p_te
        .iter()
        .zip(&p_tr)
        .map(|(&num, &den)| num / den.max(DENSITY_FLOOR))
        .collect();
    ImportanceVector::new(w)
}
