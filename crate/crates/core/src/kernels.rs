//! Gaussian and product-Epanechnikov kernels and blocked kernel matrices.

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows per block in [`kernel_matrix`].
pub const DEFAULT_BLOCK_ROWS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            bandwidth,
        }
    }

    pub fn epanechnikov(bandwidth: f64) -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
        match self.family {
            KernelFamily::Gaussian => gaussian_kernel(a, b, self.bandwidth),
            KernelFamily::Epanechnikov => epanechnikov_kernel(a, b, self.bandwidth),
        }
    }

    // Unchecked hot-path evaluation; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => gaussian_unchecked(a, b, self.bandwidth),
            KernelFamily::Epanechnikov => epanechnikov_unchecked(a, b, self.bandwidth),
        }
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `exp(-‖a-b‖² / (2σ²))`.
pub fn gaussian_kernel(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, sigma: f64) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(gaussian_unchecked(
        &a.iter().copied().collect::<Vec<_>>(),
        &b.iter().copied().collect::<Vec<_>>(),
        sigma,
    ))
}

/// Product kernel `∏ 3/4 (1 - u_j²)` over `|u_j| ≤ 1`, `u_j = (a_j - b_j)/σ`.
pub fn epanechnikov_kernel(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, sigma: f64) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(epanechnikov_unchecked(
        &a.iter().copied().collect::<Vec<_>>(),
        &b.iter().copied().collect::<Vec<_>>(),
        sigma,
    ))
}

#[inline]
fn gaussian_unchecked(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

#[inline]
fn epanechnikov_unchecked(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let mut k = 1.0;
    for (x, y) in a.iter().zip(b) {
        let u = (x - y) / sigma;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        k *= 0.75 * (1.0 - u * u);
    }
    k
}

/// `K[i, j] = kernel(A_i, B_j)` built in row blocks of [`DEFAULT_BLOCK_ROWS`].
pub fn kernel_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<Array2<f64>> {
    kernel_matrix_blocked(a, b, cfg, DEFAULT_BLOCK_ROWS)
}

pub fn kernel_matrix_blocked(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    cfg: &KernelConfig,
    block_rows: usize,
) -> Result<Array2<f64>> {
    check_len(a.ncols(), b.ncols())?;
    cfg.validate()?;
    let block_rows = block_rows.max(1);
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let b_rows: Vec<&[f64]> = b
        .outer_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let (n_a, n_b) = (a.nrows(), b.nrows());
    let mut out = Array2::<f64>::zeros((n_a, n_b));
    if n_a == 0 || n_b == 0 {
        return Ok(out);
    }
    out.as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(block_rows * n_b)
        .enumerate()
        .for_each(|(blk, chunk)| {
            let start = blk * block_rows;
            let rows = a.slice(s![start..start + chunk.len() / n_b, ..]);
            for (out_row, a_row) in chunk.chunks_mut(n_b).zip(rows.outer_iter()) {
                let a_row = a_row.to_slice().expect("standard layout");
                for (o, b_row) in out_row.iter_mut().zip(&b_rows) {
                    *o = cfg.eval_slices(a_row, b_row);
                }
            }
        });
    Ok(out)
}

/// `Σ_j kernel(A_i, B_j)` for every row of `A`, without storing the matrix.
///
/// Each sum runs over `B` in row order, so equal inputs give bit-equal sums.
pub fn kernel_row_sums(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<ndarray::Array1<f64>> {
    check_len(a.ncols(), b.ncols())?;
    cfg.validate()?;
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let b_rows: Vec<&[f64]> = b
        .outer_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let a_rows: Vec<&[f64]> = a
        .outer_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let sums: Vec<f64> = a_rows
        .par_iter()
        .map(|ar| b_rows.iter().map(|br| cfg.eval_slices(ar, br)).sum())
        .collect();
    Ok(ndarray::Array1::from(sums))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn gaussian_at_zero_distance_is_one() {
        let a = array![0.3, -2.0];
        assert_eq!(gaussian_kernel(a.view(), a.view(), 0.7).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_at_two_sigma_squared() {
        let sigma: f64 = 1.5;
        // ‖a-b‖² = 2σ²
        let a = array![0.0, 0.0];
        let b = array![sigma, sigma];
        let k = gaussian_kernel(a.view(), b.view(), sigma).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn epanechnikov_values() {
        let a = array![1.0];
        assert_eq!(epanechnikov_kernel(a.view(), a.view(), 0.5).unwrap(), 0.75);
        assert_eq!(epanechnikov_kernel(a.view(), array![1.5].view(), 0.5).unwrap(), 0.0);
        assert_eq!(epanechnikov_kernel(a.view(), array![2.0].view(), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_lengths() {
        let a = array![1.0, 2.0];
        let b = array![1.0];
        assert!(matches!(
            gaussian_kernel(a.view(), b.view(), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(epanechnikov_kernel(a.view(), b.view(), 1.0).is_err());
        assert!(kernel_matrix(
            array![[1.0, 2.0]].view(),
            array![[1.0]].view(),
            &KernelConfig::gaussian(1.0)
        )
        .is_err());
    }

    #[test]
    fn self_matrix_has_unit_diagonal() {
        let a = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let k = kernel_matrix(a.view(), a.view(), &KernelConfig::gaussian(1.0)).unwrap();
        assert_eq!(k.dim(), (3, 3));
        for i in 0..3 {
            assert_eq!(k[[i, i]], 1.0);
        }
    }

    #[test]
    fn block_size_does_not_change_entries() {
        let a = Array2::from_shape_fn((37, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.1);
        let b = Array2::from_shape_fn((23, 3), |(i, j)| ((i * 5 + j) % 13) as f64 * 0.1);
        for cfg in [KernelConfig::gaussian(0.8), KernelConfig::epanechnikov(0.9)] {
            let full = kernel_matrix_blocked(a.view(), b.view(), &cfg, 1000).unwrap();
            let small = kernel_matrix_blocked(a.view(), b.view(), &cfg, 4).unwrap();
            assert_eq!(full, small);
        }
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    proptest! {
        #[test]
        fn gaussian_is_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 3),
                                 b in proptest::collection::vec(-5.0f64..5.0, 3),
                                 sigma in 0.05f64..4.0) {
            let (a, b) = (ndarray::Array1::from(a), ndarray::Array1::from(b));
            let k1 = gaussian_kernel(a.view(), b.view(), sigma).unwrap();
            let k2 = gaussian_kernel(b.view(), a.view(), sigma).unwrap();
            prop_assert_eq!(k1, k2);
            prop_assert!((0.0..=1.0).contains(&k1));
        }

        #[test]
        fn matrix_matches_pointwise_and_transposes(a in matrix(5, 2), b in matrix(4, 2), sigma in 0.2f64..3.0) {
            for cfg in [KernelConfig::gaussian(sigma), KernelConfig::epanechnikov(sigma)] {
                let k = kernel_matrix(a.view(), b.view(), &cfg).unwrap();
                let kt = kernel_matrix(b.view(), a.view(), &cfg).unwrap();
                prop_assert_eq!(&k.t(), &kt.view());
                for i in 0..a.nrows() {
                    for j in 0..b.nrows() {
                        let direct = cfg.eval(a.row(i), b.row(j)).unwrap();
                        prop_assert_eq!(k[[i, j]], direct);
                        let upper = match cfg.family {
                            KernelFamily::Gaussian => 1.0,
                            KernelFamily::Epanechnikov => 0.75f64.powi(2),
                        };
                        prop_assert!(direct >= 0.0 && direct <= upper);
                    }
                }
            }
        }
    }
}
