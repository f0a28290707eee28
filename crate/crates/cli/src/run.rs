//! Batch evaluation over every split, estimator and φ-mode.
//!
//! Work is grouped by (dataset, seed). Within a group the missing cells run
//! in parallel, then their rows are appended in canonical order in a single
//! write, so an interrupted run leaves a prefix of the full report and a
//! rerun completes it to the same bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use covshift_core::evaluate::TrainBaseline;
use covshift_core::{Dataset, EstimatorSpec, RngStream};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::layout::{read_dataset, read_manifest, seed_dir, ShiftKind, VariantRecord};
use crate::report::{append_rows, read_report, ReportRow, RowKey, Status};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Stream for everything evaluated for one dataset under one seed.
pub fn run_stream(seed: u64, dataset: &str) -> RngStream {
    RngStream::new(seed).child("run").child(dataset)
}

fn cell_key(dataset: &str, seed: u64, variant: usize, spec: &EstimatorSpec) -> RowKey {
    (
        dataset.to_string(),
        seed,
        variant,
        spec.method.name().to_string(),
        spec.phi_mode.suffix().to_string(),
    )
}

pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<RunSummary> {
    cfg.validate()?;
    let report = cfg.report_path();
    let done: HashSet<RowKey> = read_report(&report)?.iter().map(ReportRow::key).collect();
    let cells = cfg.cells();
    let mut summary = RunSummary::default();

    for entry in &cfg.datasets {
        let name = entry.name();
        for &seed in &cfg.seeds {
            let dir = seed_dir(&cfg.out_dir, &name, seed);
            let manifest = read_manifest(&dir)?;
            let variants: &[VariantRecord] = if manifest.kind == ShiftKind::Paired {
                &manifest.variants
            } else if manifest.variants.len() >= cfg.variants {
                &manifest.variants[..cfg.variants]
            } else {
                return Err(CliError::Usage(format!(
                    "{} holds {} variants but the config asks for {}; rerun `covshift inject`",
                    dir.display(),
                    manifest.variants.len(),
                    cfg.variants
                )));
            };

            let todo: Vec<(&VariantRecord, &EstimatorSpec)> = variants
                .iter()
                .flat_map(|v| cells.iter().map(move |spec| (v, spec)))
                .filter(|(v, spec)| !done.contains(&cell_key(&name, seed, v.index, spec)))
                .collect();
            summary.skipped += variants.len() * cells.len() - todo.len();
            if todo.is_empty() {
                continue;
            }
            log::info!("{name} seed {seed}: {} cells", todo.len());

            let stream = run_stream(seed, &name);
            let train_names: BTreeSet<&str> = todo.iter().map(|(v, _)| v.train.as_str()).collect();
            let trains: BTreeMap<&str, Dataset> = train_names
                .iter()
                .map(|&t| Ok((t, read_dataset(&dir, t)?)))
                .collect::<CliResult<_>>()?;
            let test_ids: BTreeSet<usize> = todo.iter().map(|(v, _)| v.index).collect();
            let tests: BTreeMap<usize, Dataset> = variants
                .iter()
                .filter(|v| test_ids.contains(&v.index))
                .map(|v| Ok((v.index, read_dataset(&dir, &v.test)?)))
                .collect::<CliResult<_>>()?;
            // A baseline that cannot be fit fails its cells, not the batch.
            let baselines: BTreeMap<&str, Result<TrainBaseline, String>> = trains
                .par_iter()
                .map(|(&t, data)| {
                    let fit = TrainBaseline::fit(data, &cfg.learner, cfg.folds, &stream.child("baseline").child(t));
                    (t, fit.map_err(|e| format!("baseline: {e}")))
                })
                .collect();

            let rows: Vec<ReportRow> = todo
                .par_iter()
                .map(|&(v, spec)| {
                    let key = cell_key(&name, seed, v.index, spec);
                    let baseline = match &baselines[v.train.as_str()] {
                        Ok(b) => b,
                        Err(msg) => return ReportRow::failed(key, msg.clone()),
                    };
                    let cell = stream.child("cell").child_index(v.index as u64).child(&spec.label());
                    match baseline.evaluate(&trains[v.train.as_str()], &tests[&v.index], spec, &cell) {
                        Ok(r) => ReportRow::ok(key, &r),
                        Err(e) => {
                            log::warn!("{name} seed {seed} variant {} {}: {e}", v.index, spec.label());
                            ReportRow::failed(key, e.to_string())
                        }
                    }
                })
                .collect();
            summary.computed += rows.len();
            summary.failed += rows.iter().filter(|r| r.status == Status::Failed).count();
            append_rows(&report, &rows)?;
        }
    }
    Ok(summary)
}
