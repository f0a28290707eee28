//! On-disk layout of injected splits:
//!
//! ```text
//! <out>/<dataset>/seed_<s>/manifest.json
//! <out>/<dataset>/seed_<s>/train.csv        shared by all variants (classification, paired)
//! <out>/<dataset>/seed_<s>/train_<k>.csv    one per variant (regression)
//! <out>/<dataset>/seed_<s>/test_<k>.csv
//! ```
//!
//! Every CSV gets a sidecar `.json` dataset manifest.

use std::path::{Path, PathBuf};

use covshift_core::data::{read_csv, write_csv_with_manifest};
use covshift_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Prevalence,
    Sigmoid,
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub index: usize,
    pub train: String,
    pub test: String,
    pub test_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prevalences: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Source file of a paired test set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub seed: u64,
    pub rng: String,
    pub kind: ShiftKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    pub variants: Vec<VariantRecord>,
}

pub fn seed_dir(out: &Path, dataset: &str, seed: u64) -> PathBuf {
    out.join(dataset).join(format!("seed_{seed}"))
}

pub fn test_name(k: usize) -> String {
    format!("test_{k}.csv")
}

pub fn train_name(k: Option<usize>) -> String {
    match k {
        Some(k) => format!("train_{k}.csv"),
        None => "train.csv".into(),
    }
}

pub fn write_dataset(dir: &Path, name: &str, data: &Dataset) -> CliResult<()> {
    write_csv_with_manifest(data, &dir.join(name))?;
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &SplitManifest) -> CliResult<()> {
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> CliResult<SplitManifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::Core(covshift_core::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e} (run `covshift inject` first)", path.display()),
        )))
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_dataset(dir: &Path, name: &str) -> CliResult<Dataset> {
    Ok(read_csv(&dir.join(name))?)
}
