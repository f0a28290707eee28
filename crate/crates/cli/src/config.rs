//! Experiment configuration: one JSON file, with command-line overrides
//! applied on top.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use covshift_core::data::DatasetManifest;
use covshift_core::inject::DEFAULT_TEST_FRACTION;
use covshift_core::{EstimatorSpec, LearnerConfig, Method, PhiMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEEDS: [u64; 5] = [2032, 2033, 2034, 2035, 2036];
pub const DEFAULT_VARIANTS: usize = 20;
pub const DEFAULT_GAMMAS: [f64; 2] = [5.0, -5.0];

/// A source dataset, either injected from one file or given as explicit
/// train/test files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    /// Defaults to the file stem of `path` (or `train`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<PathBuf>,
    /// Overrides the sidecar manifest next to each CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<DatasetManifest>,
}

impl DatasetEntry {
    pub fn name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        self.path
            .as_ref()
            .or(self.train.as_ref())
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn is_paired(&self) -> bool {
        self.train.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetEntry>,
    pub seeds: Vec<u64>,
    /// Test variants per seed.
    pub variants: usize,
    pub test_fraction: f64,
    /// Minimum pairwise prevalence gap; `1/(10m)` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    /// Sigmoid slopes for regression, cycled over variants.
    pub gammas: Vec<f64>,
    /// Each entry is crossed with every φ-mode; its own `phi_mode` is ignored.
    pub estimators: Vec<EstimatorSpec>,
    pub phi_modes: Vec<PhiMode>,
    /// Learner evaluated by the weighted CV.
    pub learner: LearnerConfig,
    pub folds: usize,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/report.csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            seeds: DEFAULT_SEEDS.to_vec(),
            variants: DEFAULT_VARIANTS,
            test_fraction: DEFAULT_TEST_FRACTION,
            min_gap: None,
            gammas: DEFAULT_GAMMAS.to_vec(),
            estimators: Method::ALL.iter().map(|&m| EstimatorSpec::new(m)).collect(),
            phi_modes: PhiMode::ALL.to_vec(),
            learner: LearnerConfig::default(),
            folds: covshift_core::evaluate::DEFAULT_FOLDS,
            out_dir: PathBuf::from("out"),
            report: None,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            d.path.iter_mut().chain(d.train.iter_mut()).chain(d.tests.iter_mut()).for_each(fix);
        }
        fix(&mut self.out_dir);
        self.report.iter_mut().for_each(fix);
    }

    pub fn report_path(&self) -> PathBuf {
        self.report.clone().unwrap_or_else(|| self.out_dir.join("report.csv"))
    }

    /// Every (estimator, φ-mode) cell in canonical order.
    pub fn cells(&self) -> Vec<EstimatorSpec> {
        self.estimators
            .iter()
            .flat_map(|spec| self.phi_modes.iter().map(move |&phi| spec.clone().with_phi(phi)))
            .collect()
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.datasets.is_empty() {
            return usage("config lists no datasets".into());
        }
        if self.seeds.is_empty() {
            return usage("config lists no seeds".into());
        }
        if self.estimators.is_empty() || self.phi_modes.is_empty() {
            return usage("need at least one estimator and one phi mode".into());
        }
        if self.variants == 0 {
            return usage("variants must be ≥ 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return usage(format!("test_fraction must be in (0, 1), got {}", self.test_fraction));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| *g == 0.0 || !g.is_finite()) {
            return usage(format!("gammas must be non-empty and nonzero, got {:?}", self.gammas));
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            match (&d.path, &d.train) {
                (Some(_), None) if d.tests.is_empty() => {}
                (None, Some(_)) if !d.tests.is_empty() => {}
                _ => return usage(format!("dataset {:?} needs either `path`, or `train` plus `tests`", d.name())),
            }
            if !names.insert(d.name()) {
                return usage(format!("dataset name {:?} appears twice", d.name()));
            }
        }
        let mut methods = BTreeSet::new();
        for spec in &self.estimators {
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            if !methods.insert(spec.method) {
                return usage(format!("method {} is listed twice", spec.method));
            }
        }
        if BTreeSet::from_iter(&self.phi_modes).len() != self.phi_modes.len() {
            return usage("phi modes must be distinct".into());
        }
        if self.workers == Some(0) {
            return usage("workers must be ≥ 1".into());
        }
        Ok(())
    }
}

/// Parses `"LR,KLIEP"`.
pub fn parse_methods(s: &str) -> CliResult<Vec<Method>> {
    s.split(',')
        .map(|t| t.trim().parse::<Method>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

/// Parses `"C,P,CP"`.
pub fn parse_phi_modes(s: &str) -> CliResult<Vec<PhiMode>> {
    s.split(',')
        .map(|t| t.trim().parse::<PhiMode>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

/// Parses `"2032,2033"` or a range `"2032..2036"` (inclusive).
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad seed list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"datasets": [{"path": "a.csv"}], "variants": 3}"#).unwrap();
        assert_eq!(cfg.seeds, DEFAULT_SEEDS.to_vec());
        assert_eq!(cfg.variants, 3);
        assert_eq!(cfg.cells().len(), 15);
        assert_eq!(cfg.datasets[0].name(), "a");
        cfg.validate().unwrap();
    }

    #[test]
    fn estimator_params_round_trip() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"estimators": [{"method": "KMM", "upper_bound": 50.0}], "phi_modes": ["P"]}"#).unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].upper_bound, 50.0);
        assert_eq!(cells[0].label(), "KMM-P");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn duplicate_methods_are_a_usage_error() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"datasets": [{"path": "a.csv"}], "estimators": [{"method": "LR"}, {"method": "LR"}]}"#)
                .unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("2032..2034").unwrap(), vec![2032, 2033, 2034]);
        assert_eq!(parse_seeds("1, 5").unwrap(), vec![1, 5]);
        assert!(parse_seeds("3..1").is_err());
        assert_eq!(parse_methods("lr,KLIEP").unwrap(), vec![Method::Lr, Method::Kliep]);
        assert_eq!(parse_phi_modes("C,CP").unwrap(), vec![PhiMode::Covariates, PhiMode::Both]);
    }
}
