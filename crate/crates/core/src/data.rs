//! Datasets, validation, and train-fit standardization.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    pub fn classes(&self) -> Option<usize> {
        match *self {
            Task::Classification { classes } => Some(classes),
            Task::Regression => None,
        }
    }
}

/// Covariates, targets, and task kind.
///
/// Classification targets are stored as `f64` holding the dense class index
/// `0..m`. Build through [`Dataset::new`] to get a validated value, or
/// [`Dataset::raw`] followed by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Array2<f64>,
    targets: Array1<f64>,
    task: Task,
}

impl Dataset {
    pub fn raw(covariates: Array2<f64>, targets: Array1<f64>, task: Task) -> Self {
        Self {
            covariates,
            targets,
            task,
        }
    }

    pub fn new(covariates: Array2<f64>, targets: Array1<f64>, task: Task) -> Result<Self> {
        validate_dataset(Self::raw(covariates, targets, task))
    }

    pub fn classification(covariates: Array2<f64>, labels: &[usize], classes: usize) -> Result<Self> {
        let targets = labels.iter().map(|&l| l as f64).collect();
        Self::new(covariates, targets, Task::Classification { classes })
    }

    pub fn regression(covariates: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        Self::new(covariates, targets, Task::Regression)
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn len(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.covariates.ncols()
    }

    /// Class indices; empty for regression.
    pub fn labels(&self) -> Vec<usize> {
        match self.task {
            Task::Classification { .. } => self.targets.iter().map(|&t| t as usize).collect(),
            Task::Regression => Vec::new(),
        }
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            covariates: self.covariates.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            task: self.task,
        }
    }

    pub fn with_covariates(&self, covariates: Array2<f64>) -> Result<Dataset> {
        if covariates.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: covariates.nrows(),
            });
        }
        Ok(Dataset {
            covariates,
            targets: self.targets.clone(),
            task: self.task,
        })
    }
}

pub fn validate_dataset(raw: Dataset) -> Result<Dataset> {
    let (n, d) = raw.covariates.dim();
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    if raw.targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: raw.targets.len(),
        });
    }
    if raw.covariates.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariates"));
    }
    if raw.targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    if let Task::Classification { classes } = raw.task {
        if classes == 0 {
            return Err(Error::InvalidParameter("class count must be positive".into()));
        }
        for &t in raw.targets.iter() {
            if t < 0.0 || t.fract() != 0.0 || t >= classes as f64 {
                return Err(Error::BadLabel { label: t, classes });
            }
        }
    }
    Ok(raw)
}

/// Per-column affine map fit on training covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns whose training variance was zero; their scale is 1.
    pub unit_scale: Vec<bool>,
}

impl ScalingRecord {
    /// Column means and population standard deviations of `x`.
    pub fn fit(x: ArrayView2<'_, f64>) -> ScalingRecord {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        let mut unit_scale = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            // Treat round-off-level spread as constant.
            if sd <= 1e-12 * mean.abs().max(1.0) {
                means.push(mean);
                scales.push(1.0);
                unit_scale.push(true);
            } else {
                means.push(mean);
                scales.push(sd);
                unit_scale.push(false);
            }
        }
        ScalingRecord {
            means,
            scales,
            unit_scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_dim(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_dim(z.ncols())?;
        let mut out = z.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Z-score both matrices using the statistics of `train`.
pub fn standardize_matrices(
    train: ArrayView2<'_, f64>,
    test: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>, ScalingRecord)> {
    if train.ncols() != test.ncols() {
        return Err(Error::DimensionMismatch {
            expected: train.ncols(),
            found: test.ncols(),
        });
    }
    let record = ScalingRecord::fit(train);
    let tr = record.transform(train)?;
    let te = record.transform(test)?;
    Ok((tr, te, record))
}

pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, ScalingRecord)> {
    let (tr, te, record) = standardize_matrices(train.covariates(), test.covariates())?;
    Ok((train.with_covariates(tr)?, test.with_covariates(te)?, record))
}

/// Sidecar description of a CSV dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: TaskKind,
    /// Number of classes; inferred from the labels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    /// Explicit label order for string labels; position = class index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Whether the first row is a header; sniffed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl DatasetManifest {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification { classes } => DatasetManifest {
                task: TaskKind::Classification,
                classes: Some(classes),
                labels: None,
                header: Some(true),
            },
            Task::Regression => DatasetManifest {
                task: TaskKind::Regression,
                classes: None,
                labels: None,
                header: Some(true),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sidecar manifest location for a CSV file: same path with a `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Reads a CSV (covariate columns, then the target column) using its sidecar manifest.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(&sidecar_path(path))?;
    read_csv_with(path, &manifest)
}

pub fn read_csv_with(path: &Path, manifest: &DatasetManifest) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    parse_rows(rows, manifest)
}

fn parse_rows(mut rows: Vec<Vec<String>>, manifest: &DatasetManifest) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::Parse("need at least one covariate column and a target".into()));
    }
    let has_header = manifest
        .header
        .unwrap_or_else(|| rows[0][..width - 1].iter().any(|f| f.parse::<f64>().is_err()));
    if has_header {
        rows.remove(0);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = rows.len();
    let d = width - 1;
    let mut x = Array2::<f64>::zeros((n, d));
    let mut raw_targets = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {width}",
                i + 1,
                row.len()
            )));
        }
        for j in 0..d {
            x[[i, j]] = parse_number(&row[j], i, j)?;
        }
        raw_targets.push(row[d].as_str());
    }

    match manifest.task {
        TaskKind::Regression => {
            let y = raw_targets
                .iter()
                .enumerate()
                .map(|(i, t)| parse_number(t, i, d))
                .collect::<Result<Array1<f64>>>()?;
            Dataset::regression(x, y)
        }
        TaskKind::Classification => {
            let (labels, inferred) = encode_labels(&raw_targets, manifest.labels.as_deref())?;
            let classes = manifest.classes.unwrap_or(inferred);
            let y = labels.iter().map(|&l| l as f64).collect();
            Dataset::new(x, y, Task::Classification { classes })
        }
    }
}

fn parse_number(field: &str, row: usize, col: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {}, column {}: {field:?} is not a number", row + 1, col + 1)))
}

// Integer labels pass through; anything else is mapped to dense indices in
// sorted order unless an explicit order is given.
fn encode_labels(raw: &[&str], order: Option<&[String]>) -> Result<(Vec<i64>, usize)> {
    if let Some(order) = order {
        let labels = raw
            .iter()
            .map(|r| {
                order
                    .iter()
                    .position(|o| o == r)
                    .map(|p| p as i64)
                    .ok_or_else(|| Error::Parse(format!("label {r:?} not listed in manifest")))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((labels, order.len()));
    }
    let as_ints: Option<Vec<i64>> = raw
        .iter()
        .map(|r| {
            r.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && v.is_finite())
                .map(|v| v as i64)
        })
        .collect();
    if let Some(ints) = as_ints {
        let m = ints.iter().copied().max().unwrap_or(0).max(0) as usize + 1;
        return Ok((ints, m));
    }
    let uniq: BTreeSet<&str> = raw.iter().copied().collect();
    let uniq: Vec<&str> = uniq.into_iter().collect();
    let labels = raw
        .iter()
        .map(|r| uniq.binary_search(r).expect("label collected above") as i64)
        .collect();
    Ok((labels, uniq.len()))
}

/// Writes covariates and target with a `x0,…,x{d-1},y` header.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    let classification = data.task().is_classification();
    for (row, &t) in data.covariates().outer_iter().zip(data.targets()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(if classification {
            (t as i64).to_string()
        } else {
            t.to_string()
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset plus its sidecar manifest.
pub fn write_csv_with_manifest(data: &Dataset, path: &Path) -> Result<()> {
    write_csv(data, path)?;
    let manifest = DatasetManifest::for_task(data.task());
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
