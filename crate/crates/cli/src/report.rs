//! The report CSV: one row per (dataset, seed, variant, method, φ-mode),
//! append-only, fixed column order.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use covshift_core::EvalResult;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 12] = [
    "dataset",
    "method",
    "phi_mode",
    "seed",
    "variant",
    "actual_error",
    "weighted_estimate",
    "unweighted_estimate",
    "distance_weighted",
    "distance_unweighted",
    "status",
    "message",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub phi_mode: String,
    pub seed: u64,
    pub variant: usize,
    pub actual_error: Option<f64>,
    pub weighted_estimate: Option<f64>,
    pub unweighted_estimate: Option<f64>,
    pub distance_weighted: Option<f64>,
    pub distance_unweighted: Option<f64>,
    pub status: Status,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

pub type RowKey = (String, u64, usize, String, String);

impl ReportRow {
    pub fn key(&self) -> RowKey {
        (self.dataset.clone(), self.seed, self.variant, self.method.clone(), self.phi_mode.clone())
    }

    pub fn ok(key: RowKey, r: &EvalResult) -> Self {
        let (dataset, seed, variant, method, phi_mode) = key;
        Self {
            dataset,
            method,
            phi_mode,
            seed,
            variant,
            actual_error: Some(r.actual_error),
            weighted_estimate: Some(r.weighted_estimate),
            unweighted_estimate: Some(r.unweighted_estimate),
            distance_weighted: Some(r.distance_weighted),
            distance_unweighted: Some(r.distance_unweighted),
            status: Status::Ok,
            message: String::new(),
        }
    }

    pub fn failed(key: RowKey, message: String) -> Self {
        let (dataset, seed, variant, method, phi_mode) = key;
        Self {
            dataset,
            method,
            phi_mode,
            seed,
            variant,
            actual_error: None,
            weighted_estimate: None,
            unweighted_estimate: None,
            distance_weighted: None,
            distance_unweighted: None,
            status: Status::Failed,
            message,
        }
    }
}

fn header_line() -> String {
    COLUMNS.join(",") + "\n"
}

// A killed writer can leave a partial last line; cut back to the last newline.
fn drop_torn_tail(path: &Path) -> CliResult<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    log::warn!("{}: dropping incomplete last line", path.display());
    f.set_len(keep as u64)?;
    Ok(())
}

/// Rows of an existing report, or nothing when the file does not exist.
pub fn read_report(path: &Path) -> CliResult<Vec<ReportRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    drop_torn_tail(path)?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header != COLUMNS {
        return Err(CliError::Core(covshift_core::Error::Parse(format!(
            "{} does not have the report columns {}",
            path.display(),
            COLUMNS.join(",")
        ))));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Appends a batch in one write; creates the file with its header first.
pub fn append_rows(path: &Path, rows: &[ReportRow]) -> CliResult<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut buf = Vec::new();
    if fresh {
        buf.extend_from_slice(header_line().as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&buf)?;
    f.sync_data()?;
    Ok(())
}
