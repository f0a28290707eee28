//! Five-covariate toy with one relevant covariate whose test distribution
//! is shifted to the right. The true importance is known in closed form, so
//! estimated weights can be scored directly.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::estimators::{estimate, feature_space, kde_densities, EstimatorSpec, Method};
use crate::phi::PhiMode;
use crate::rng::RngStream;

/// Floor applied to estimated weights before taking logs.
pub const MSLE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Total covariates; column 0 is the relevant one.
    pub covariates: usize,
    /// Mean of the relevant covariate on the test side.
    pub shift: f64,
    pub slope: f64,
    pub curvature: f64,
    pub noise: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_train: 100,
            n_test: 100,
            covariates: 5,
            shift: 1.0,
            slope: 1.0,
            curvature: 0.0,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub train: Dataset,
    pub test: Dataset,
}

fn draw(cfg: &ToyConfig, n: usize, mean: f64, rng: &mut RngStream) -> Result<Dataset> {
    let x = Array2::from_shape_fn((n, cfg.covariates), |(_, j)| {
        let z: f64 = rng.sample(StandardNormal);
        if j == 0 {
            mean + z
        } else {
            z
        }
    });
    let y = Array1::from_shape_fn(n, |i| {
        let r = x[[i, 0]];
        let e: f64 = rng.sample(StandardNormal);
        cfg.slope * r + cfg.curvature * r * r + cfg.noise * e
    });
    Dataset::regression(x, y)
}

pub fn generate_toy(cfg: &ToyConfig, rng: &RngStream) -> Result<ToyData> {
    Ok(ToyData {
        train: draw(cfg, cfg.n_train, 0.0, &mut rng.child("train"))?,
        test: draw(cfg, cfg.n_test, cfg.shift, &mut rng.child("test"))?,
    })
}

/// `N(x; μ, 1) / N(x; 0, 1) = exp(μx − μ²/2)`.
pub fn theoretical_weight(x: f64, shift: f64) -> f64 {
    (shift * x - shift * shift / 2.0).exp()
}

/// Mean squared difference of logs, with `ŵ` floored at [`MSLE_FLOOR`].
pub fn msle(estimated: &[f64], truth: &[f64]) -> f64 {
    let sum: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(&e, &t)| {
            let d = e.max(MSLE_FLOOR).ln() - t.ln();
            d * d
        })
        .sum();
    sum / estimated.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub x_relevant: f64,
    pub w_true: f64,
    pub p_tr_hat: f64,
    pub p_te_hat: f64,
    pub w_phi_x: f64,
    pub w_phi_fx: f64,
}

#[derive(Debug, Clone)]
pub struct ToyReport {
    pub rows: Vec<ToyRow>,
    pub msle_phi_x: f64,
    pub msle_phi_fx: f64,
}

/// KLIEP weights under `φ = x` and `φ = f(x)`, plus KDE densities in the
/// `f(x)` feature space, at every training point.
pub fn toy_report(cfg: &ToyConfig, base: &EstimatorSpec, rng: &RngStream) -> Result<ToyReport> {
    let data = generate_toy(cfg, rng)?;
    let test_x = data.test.covariates();
    let spec_x = base.clone().with_phi(PhiMode::Covariates);
    let spec_fx = base.clone().with_phi(PhiMode::Predictions);
    let w_x = estimate(&spec_x, &data.train, test_x, &rng.child("phi_x"))?;
    let w_fx = estimate(&spec_fx, &data.train, test_x, &rng.child("phi_fx"))?;

    let kde = EstimatorSpec::new(Method::Kde).with_phi(PhiMode::Predictions);
    let (v_tr, v_te) = feature_space(&kde, &data.train, test_x)?;
    let (p_tr, p_te) = kde_densities(v_tr.view(), v_te.view(), &kde.kernel_config())?;

    let xs = data.train.covariates().column(0).to_vec();
    let truth: Vec<f64> = xs.iter().map(|&x| theoretical_weight(x, cfg.shift)).collect();
    let rows = (0..xs.len())
        .map(|i| ToyRow {
            x_relevant: xs[i],
            w_true: truth[i],
            p_tr_hat: p_tr[i],
            p_te_hat: p_te[i],
            w_phi_x: w_x.weights()[i],
            w_phi_fx: w_fx.weights()[i],
        })
        .collect();
    Ok(ToyReport {
        rows,
        msle_phi_x: msle(w_x.weights().as_slice().expect("contiguous"), &truth),
        msle_phi_fx: msle(w_fx.weights().as_slice().expect("contiguous"), &truth),
    })
}

pub fn write_toy_csv(report: &ToyReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
