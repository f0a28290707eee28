//! One-shot commands: the toy reproduction and a single importance vector.

use std::path::Path;

use covshift_core::data::read_csv;
use covshift_core::toy::{toy_report, write_toy_csv, ToyConfig, ToyReport};
use covshift_core::{estimate, EstimatorSpec, ImportanceVector, RngStream};

use crate::error::CliResult;

/// Writes the per-training-point toy CSV and returns the report.
pub fn cmd_toy(cfg: &ToyConfig, spec: &EstimatorSpec, seed: u64, out: &Path) -> CliResult<ToyReport> {
    let report = toy_report(cfg, spec, &RngStream::new(seed).child("toy"))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_toy_csv(&report, out)?;
    Ok(report)
}

/// Importance of every row of `train` with respect to `test`; only the test
/// covariates are read.
pub fn cmd_estimate(train: &Path, test: &Path, spec: &EstimatorSpec, seed: u64, out: &Path) -> CliResult<ImportanceVector> {
    let train = read_csv(train)?;
    let test = read_csv(test)?;
    let w = estimate(spec, &train, test.covariates(), &RngStream::new(seed).child("estimate"))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    w.write_csv(out)?;
    Ok(w)
}
