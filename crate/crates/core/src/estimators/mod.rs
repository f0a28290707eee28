//! Importance estimators.
//!
//! Every estimator consumes φ-transformed training and test matrices and
//! returns one nonnegative weight per training row. [`estimate`] is the entry
//! point that runs the whole chain: fit φ on the training set, map both
//! sides, standardize with training statistics, then dispatch.

mod kde;
mod kliep;
mod kmm;
mod lr;

pub use kde::{kde_densities, kde_importance};
pub use kliep::{kliep_fit, kliep_importance, KliepFit};
pub use kmm::{default_epsilon, ekmm_importance, kmm_importance, kmm_solve, partition_indices};
pub use lr::{lr_importance, lr_weight, LR_PROBABILITY_FLOOR};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{standardize_matrices, Dataset};
use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::learners::LearnerConfig;
use crate::phi::{fit_phi, PhiMode};
use crate::rng::RngStream;

/// One nonnegative, finite weight per training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    weights: Array1<f64>,
}

impl ImportanceVector {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("importance weights"));
        }
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidParameter(format!("negative importance weight {w}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: Array1::ones(n),
        }
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.weights.mean().unwrap_or(0.0)
    }

    /// Single-column CSV with header `w`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["w"])?;
        for v in &self.weights {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let field = rec.get(0).unwrap_or("");
            out.push(field.parse::<f64>().map_err(|_| Error::Parse(format!("bad weight {field:?}")))?);
        }
        Self::new(Array1::from(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "KMM")]
    Kmm,
    #[serde(rename = "EKMM")]
    Ekmm,
    #[serde(rename = "KDE")]
    Kde,
    #[serde(rename = "KLIEP")]
    Kliep,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Lr, Method::Kmm, Method::Ekmm, Method::Kde, Method::Kliep];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Lr => "LR",
            Method::Kmm => "KMM",
            Method::Ekmm => "EKMM",
            Method::Kde => "KDE",
            Method::Kliep => "KLIEP",
        }
    }

    /// Kernel used when a spec does not set one: Epanechnikov for KDE,
    /// Gaussian otherwise, both with unit bandwidth.
    pub fn default_kernel(&self) -> KernelConfig {
        match self {
            Method::Kde => KernelConfig::epanechnikov(1.0),
            _ => KernelConfig::gaussian(1.0),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LR" => Ok(Method::Lr),
            "KMM" => Ok(Method::Kmm),
            "EKMM" => Ok(Method::Ekmm),
            "KDE" => Ok(Method::Kde),
            "KLIEP" => Ok(Method::Kliep),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Which side EKMM partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleAxis {
    /// Split test rows; fuse component weights by `|S_k| / n_te`.
    TestPartition,
    /// Split training rows; each row takes the weight from its own shard.
    TrainPartition,
}

/// Estimator choice and all of its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSpec {
    pub method: Method,
    pub phi_mode: PhiMode,
    /// Defaults to [`Method::default_kernel`]. KLIEP only uses the family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    /// Z-score the φ outputs with training statistics before estimation.
    pub standardize: bool,
    /// Learner that produces prediction features for `P` and `CP`.
    pub phi_learner: LearnerConfig,

    /// KMM/EKMM box bound B.
    pub upper_bound: f64,
    /// KMM/EKMM slab half-width ε; `(√n − 1)/√n` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    /// Kernel matrix entries allowed per KMM solve.
    pub max_kernel_entries: usize,
    pub partitions: usize,
    pub ensemble_axis: EnsembleAxis,

    pub basis_count: usize,
    pub sigma_grid: Vec<f64>,
    pub kliep_folds: usize,
    pub kliep_tol: f64,
    pub kliep_max_iter: usize,

    /// Regularization of the LR train-vs-test discriminator.
    pub lr_lambda: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            method: Method::Kliep,
            phi_mode: PhiMode::Covariates,
            kernel: None,
            standardize: true,
            phi_learner: LearnerConfig::default(),
            upper_bound: 1000.0,
            epsilon: None,
            qp_tol: 1e-6,
            qp_max_iter: 5000,
            max_kernel_entries: 1 << 28,
            partitions: 20,
            ensemble_axis: EnsembleAxis::TrainPartition,
            basis_count: 100,
            sigma_grid: vec![0.01, 0.1, 0.25, 0.5, 0.75, 1.0],
            kliep_folds: 3,
            kliep_tol: 1e-8,
            kliep_max_iter: 2000,
            lr_lambda: 1.0,
        }
    }
}

impl EstimatorSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_phi(mut self, phi_mode: PhiMode) -> Self {
        self.phi_mode = phi_mode;
        self
    }

    pub fn kernel_config(&self) -> KernelConfig {
        self.kernel.unwrap_or_else(|| self.method.default_kernel())
    }

    /// Short label such as `KLIEP-CP`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.method, self.phi_mode)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_config().validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.partitions < 1 {
            return bad("partition count must be ≥ 1".into());
        }
        if self.basis_count < 1 {
            return bad("basis count must be ≥ 1".into());
        }
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad(format!("sigma grid must be non-empty and positive, got {:?}", self.sigma_grid));
        }
        if !(self.upper_bound > 0.0) {
            return bad(format!("upper bound must be positive, got {}", self.upper_bound));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return bad(format!("epsilon must be ≥ 0, got {eps}"));
            }
        }
        if self.kliep_folds < 2 {
            return bad("KLIEP needs at least two cross-validation folds".into());
        }
        if !(self.lr_lambda >= 0.0) {
            return bad(format!("LR lambda must be ≥ 0, got {}", self.lr_lambda));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// φ-maps both sides, then standardizes them if `spec.standardize` is set.
pub fn feature_space(
    spec: &EstimatorSpec,
    train: &Dataset,
    test_covariates: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mapper = fit_phi(train, spec.phi_mode, &spec.phi_learner)?;
    let v_tr = mapper.apply(train.covariates())?;
    let v_te = mapper.apply(test_covariates)?;
    if spec.standardize {
        let (a, b, _) = standardize_matrices(v_tr.view(), v_te.view())?;
        Ok((a, b))
    } else {
        Ok((v_tr, v_te))
    }
}

/// Importance of every training row with respect to `test_covariates`.
///
/// Only test covariates are accepted: test targets cannot influence the weights.
pub fn estimate(
    spec: &EstimatorSpec,
    train: &Dataset,
    test_covariates: ArrayView2<'_, f64>,
    rng: &RngStream,
) -> Result<ImportanceVector> {
    spec.validate()?;
    if test_covariates.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (v_tr, v_te) = feature_space(spec, train, test_covariates)?;
    estimate_features(spec, v_tr.view(), v_te.view(), rng)
}

/// Dispatch on already-mapped feature matrices.
pub fn estimate_features(
    spec: &EstimatorSpec,
    v_tr: ArrayView2<'_, f64>,
    v_te: ArrayView2<'_, f64>,
    rng: &RngStream,
) -> Result<ImportanceVector> {
    match spec.method {
        Method::Lr => lr_importance(v_tr, v_te, spec.lr_lambda),
        Method::Kmm => kmm_importance(v_tr, v_te, spec),
        Method::Ekmm => ekmm_importance(v_tr, v_te, spec, &mut rng.child("ekmm")),
        Method::Kde => kde_importance(v_tr, v_te, spec),
        Method::Kliep => kliep_importance(v_tr, v_te, spec, &mut rng.child("kliep")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_round_trip_and_defaults() {
        let spec = EstimatorSpec::new(Method::Ekmm).with_phi(PhiMode::Both);
        let back = EstimatorSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
        let partial = EstimatorSpec::from_json(r#"{"method": "KDE", "phi_mode": "P"}"#).unwrap();
        assert_eq!(partial.kernel_config(), KernelConfig::epanechnikov(1.0));
        assert_eq!(partial.partitions, 20);
        assert_eq!(partial.upper_bound, 1000.0);
        assert_eq!(partial.label(), "KDE-P");
    }

    #[test]
    fn spec_validation() {
        let mut spec = EstimatorSpec::new(Method::Kliep);
        spec.sigma_grid.clear();
        assert!(spec.validate().is_err());
        let mut spec = EstimatorSpec::new(Method::Ekmm);
        spec.partitions = 0;
        assert!(spec.validate().is_err());
        let mut spec = EstimatorSpec::new(Method::Kliep);
        spec.basis_count = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn importance_vector_rejects_bad_entries() {
        assert!(ImportanceVector::new(Array1::from(vec![1.0, -0.1])).is_err());
        assert!(ImportanceVector::new(Array1::from(vec![1.0, f64::INFINITY])).is_err());
    }

    #[test]
    fn importance_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let w = ImportanceVector::new(Array1::from(vec![0.5, 1.25, 0.0])).unwrap();
        w.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("w\n"));
        assert_eq!(ImportanceVector::read_csv(&path).unwrap(), w);
    }
}
