use std::f64::consts::PI;

use covshift_core::data::standardize_matrices;
use covshift_core::estimators::{
    default_epsilon, ekmm_importance, estimate, estimate_features, kde_importance, kliep_fit, kmm_importance, kmm_solve,
};
use covshift_core::kernels::kernel_matrix;
use covshift_core::learners::fit_ridge;
use covshift_core::toy::{generate_toy, ToyConfig};
use covshift_core::{Dataset, EnsembleAxis, EstimatorSpec, KernelConfig, Method, PhiMode, RngStream};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut RngStream, n: usize, d: usize, shift: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || shift + rng.sample::<f64, _>(StandardNormal))
}

/// Double-loop density ratio with the normalizers written out by hand.
fn kde_oracle(tr: &Array2<f64>, te: &Array2<f64>, gaussian: bool, sigma: f64) -> Vec<f64> {
    let d = tr.ncols() as i32;
    let k = |a: &[f64], b: &[f64]| -> f64 {
        if gaussian {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            (-sq / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).powf(d as f64 / 2.0)
        } else {
            let mut prod = 1.0;
            for (x, y) in a.iter().zip(b) {
                let u = (x - y) / sigma;
                prod *= if u.abs() < 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 };
            }
            prod / sigma.powi(d)
        }
    };
    let rows = |m: &Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    let (a, b) = (rows(tr), rows(te));
    a.iter()
        .map(|x| {
            let p_tr: f64 = a.iter().map(|y| k(x, y)).sum::<f64>() / a.len() as f64;
            let p_te: f64 = b.iter().map(|y| k(x, y)).sum::<f64>() / b.len() as f64;
            p_te / p_tr.max(1e-300)
        })
        .collect()
}

#[test]
fn kde_matches_double_loop() {
    let mut rng = RngStream::new(21);
    let tr = normal(&mut rng, 5, 2, 0.0);
    let te = normal(&mut rng, 5, 2, 0.4);
    for (gaussian, kernel) in [(true, KernelConfig::gaussian(0.9)), (false, KernelConfig::epanechnikov(1.7))] {
        let spec = EstimatorSpec {
            kernel: Some(kernel),
            ..EstimatorSpec::new(Method::Kde)
        };
        let w = kde_importance(tr.view(), te.view(), &spec).unwrap();
        let oracle = kde_oracle(&tr, &te, gaussian, kernel.bandwidth);
        for (a, b) in w.weights().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn gaussian_kernel_matrix_is_psd() {
    let mut rng = RngStream::new(3);
    let x = normal(&mut rng, 40, 3, 0.0);
    let k = kernel_matrix(x.view(), x.view(), &KernelConfig::gaussian(0.7)).unwrap();
    let m = DMatrix::from_row_slice(40, 40, k.as_slice().unwrap());
    let eig = SymmetricEigen::new(m);
    assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-8));
}

#[test]
fn ridge_matches_augmented_normal_equations() {
    let mut rng = RngStream::new(5);
    let x = normal(&mut rng, 30, 3, 0.0);
    let y = Array1::from_shape_simple_fn(30, || rng.sample::<f64, _>(StandardNormal));
    let lambda = 0.7;
    let model = fit_ridge(&Dataset::regression(x.clone(), y.clone()).unwrap(), lambda).unwrap();
    // [XᵀX + λP, Xᵀ1; 1ᵀX, n] with an unpenalized intercept.
    let mut a = DMatrix::<f64>::zeros(4, 4);
    let mut r = DVector::<f64>::zeros(4);
    for i in 0..30 {
        let row = [x[[i, 0]], x[[i, 1]], x[[i, 2]], 1.0];
        for p in 0..4 {
            r[p] += row[p] * y[i];
            for q in 0..4 {
                a[(p, q)] += row[p] * row[q];
            }
        }
    }
    for p in 0..3 {
        a[(p, p)] += lambda;
    }
    let sol = a.lu().solve(&r).unwrap();
    for j in 0..3 {
        assert!((model.weights[[j, 0]] - sol[j]).abs() < 1e-10);
    }
    assert!((model.bias[0] - sol[3]).abs() < 1e-10);
}

#[test]
fn kmm_solutions_are_feasible() {
    for seed in 0..8 {
        let mut rng = RngStream::new(seed);
        let tr = normal(&mut rng, 50, 2, 0.0);
        let te = normal(&mut rng, 40, 2, 0.7);
        let spec = EstimatorSpec::new(Method::Kmm);
        let r = kmm_solve(tr.view(), te.view(), &spec).unwrap();
        assert!(r.converged);
        let eps = default_epsilon(50);
        let total: f64 = r.solution.iter().sum();
        assert!(r.solution.iter().all(|&w| (-1e-9..=spec.upper_bound + 1e-9).contains(&w)));
        assert!((total - 50.0).abs() <= 50.0 * eps + 1e-9);
        for pair in r.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }
}

#[test]
fn ekmm_single_test_component_equals_kmm_bitwise() {
    let mut rng = RngStream::new(11);
    let tr = normal(&mut rng, 60, 2, 0.0);
    let te = normal(&mut rng, 45, 2, 0.5);
    let spec = EstimatorSpec {
        partitions: 1,
        ensemble_axis: EnsembleAxis::TestPartition,
        ..EstimatorSpec::new(Method::Ekmm)
    };
    let kmm = kmm_importance(tr.view(), te.view(), &spec).unwrap();
    let ekmm = ekmm_importance(tr.view(), te.view(), &spec, &mut RngStream::new(99)).unwrap();
    let a: Vec<u64> = kmm.weights().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = ekmm.weights().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn ekmm_stays_close_to_kmm_on_a_shifted_toy() {
    // Test-partition ensemble (the size-weighted fusion) against a single full
    // solve, on standardized covariates of the 200 + 200 toy.
    let cfg = ToyConfig {
        n_train: 200,
        n_test: 200,
        ..ToyConfig::default()
    };
    let spec = EstimatorSpec {
        ensemble_axis: EnsembleAxis::TestPartition,
        ..EstimatorSpec::new(Method::Ekmm)
    };
    let mut total = 0.0;
    for seed in 0..10 {
        let toy = generate_toy(&cfg, &RngStream::new(100 + seed)).unwrap();
        let (tr, te, _) = standardize_matrices(toy.train.covariates(), toy.test.covariates()).unwrap();
        let kmm = kmm_importance(tr.view(), te.view(), &spec).unwrap();
        let ekmm = ekmm_importance(tr.view(), te.view(), &spec, &mut RngStream::new(seed)).unwrap();
        total += (kmm.weights() - ekmm.weights()).mapv(f64::abs).mean().unwrap();
    }
    assert!(total / 10.0 <= 0.5, "mean |w_EKMM − w_KMM| = {}", total / 10.0);
}

#[test]
fn kliep_certification_on_shifted_samples() {
    for seed in 0..5 {
        let mut rng = RngStream::new(seed);
        let tr = normal(&mut rng, 80, 2, 0.0);
        let te = normal(&mut rng, 60, 2, 0.8);
        let fit = kliep_fit(tr.view(), te.view(), &EstimatorSpec::new(Method::Kliep), &mut RngStream::new(seed)).unwrap();
        assert!((fit.weights.mean() - 1.0).abs() <= 1e-6);
        assert!(fit.weights.weights().iter().all(|&w| w >= 0.0));
        for pair in fit.report.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }
}

#[test]
fn kliep_prefers_smaller_sigma_on_ties() {
    // Constant feature: every bandwidth yields the same flat basis and score.
    let tr = Array2::<f64>::zeros((12, 1));
    let te = Array2::<f64>::zeros((9, 1));
    let fit = kliep_fit(tr.view(), te.view(), &EstimatorSpec::new(Method::Kliep), &mut RngStream::new(0)).unwrap();
    assert_eq!(fit.sigma, 0.01);
    assert!(fit.weights.weights().iter().all(|&w| (w - 1.0).abs() < 1e-9));
}

#[test]
fn identity_phi_kde_equals_direct_call_on_standardized_covariates() {
    let mut rng = RngStream::new(8);
    let tr = normal(&mut rng, 30, 2, 0.0);
    let te = normal(&mut rng, 25, 2, 0.5);
    let y = Array1::from_shape_simple_fn(30, || rng.sample::<f64, _>(StandardNormal));
    let train = Dataset::regression(tr.clone(), y).unwrap();
    let spec = EstimatorSpec::new(Method::Kde).with_phi(PhiMode::Covariates);
    let via_estimate = estimate(&spec, &train, te.view(), &RngStream::new(1)).unwrap();
    let (a, b, _) = standardize_matrices(tr.view(), te.view()).unwrap();
    let direct = kde_importance(a.view(), b.view(), &spec).unwrap();
    assert_eq!(via_estimate, direct);
}

#[test]
fn every_method_is_deterministic_and_well_formed() {
    let mut rng = RngStream::new(31);
    let tr = normal(&mut rng, 60, 2, 0.0);
    let te = normal(&mut rng, 50, 2, 0.6);
    for method in Method::ALL {
        let spec = EstimatorSpec {
            partitions: 5,
            ..EstimatorSpec::new(method)
        };
        let a = estimate_features(&spec, tr.view(), te.view(), &RngStream::new(4)).unwrap();
        let b = estimate_features(&spec, tr.view(), te.view(), &RngStream::new(4)).unwrap();
        assert_eq!(a, b, "{method}");
        assert_eq!(a.len(), 60);
        assert!(a.weights().iter().all(|w| w.is_finite() && *w >= 0.0));
    }
}
