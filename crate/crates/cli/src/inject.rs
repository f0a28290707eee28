use std::path::Path;

use covshift_core::data::{read_csv, read_csv_with};
use covshift_core::inject::{default_min_gap, inject_classification, regression_variants};
use covshift_core::rng::ALGORITHM;
use covshift_core::{Dataset, RngStream, Task};
use rayon::prelude::*;

use crate::config::{DatasetEntry, ExperimentConfig};
use crate::error::CliResult;
use crate::layout::{seed_dir, test_name, train_name, write_dataset, write_manifest, ShiftKind, SplitManifest, VariantRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectSummary {
    pub train_files: usize,
    pub test_files: usize,
}

fn load(path: &Path, entry: &DatasetEntry) -> CliResult<Dataset> {
    Ok(match &entry.manifest {
        Some(m) => read_csv_with(path, m)?,
        None => read_csv(path)?,
    })
}

/// Stream for everything injected for one dataset under one seed.
pub fn inject_stream(seed: u64, dataset: &str) -> RngStream {
    RngStream::new(seed).child("inject").child(dataset)
}

/// Writes every (dataset, seed) split directory, replacing earlier contents.
pub fn cmd_inject(cfg: &ExperimentConfig) -> CliResult<InjectSummary> {
    cfg.validate()?;
    let mut total = InjectSummary::default();
    for entry in &cfg.datasets {
        let name = entry.name();
        let sources = if let Some(train) = &entry.train {
            let tests = entry.tests.iter().map(|p| load(p, entry)).collect::<CliResult<Vec<_>>>()?;
            Source::Paired(load(train, entry)?, tests)
        } else {
            Source::Single(load(entry.path.as_deref().expect("validated"), entry)?)
        };
        let per_seed: Vec<InjectSummary> = cfg
            .seeds
            .par_iter()
            .map(|&seed| inject_one(cfg, entry, &name, seed, &sources))
            .collect::<CliResult<_>>()?;
        for s in per_seed {
            total.train_files += s.train_files;
            total.test_files += s.test_files;
        }
        log::info!("{name}: injected {} seeds", cfg.seeds.len());
    }
    Ok(total)
}

enum Source {
    Single(Dataset),
    Paired(Dataset, Vec<Dataset>),
}

fn fresh_dir(dir: &Path) -> CliResult<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn inject_one(cfg: &ExperimentConfig, entry: &DatasetEntry, name: &str, seed: u64, source: &Source) -> CliResult<InjectSummary> {
    let dir = seed_dir(&cfg.out_dir, name, seed);
    let rng = inject_stream(seed, name);
    let mut manifest = SplitManifest {
        dataset: name.to_string(),
        seed,
        rng: ALGORITHM.to_string(),
        kind: ShiftKind::Paired,
        test_fraction: None,
        min_gap: None,
        variants: Vec::new(),
    };
    let mut summary = InjectSummary::default();

    match source {
        Source::Paired(train, tests) => {
            fresh_dir(&dir)?;
            write_dataset(&dir, &train_name(None), train)?;
            summary.train_files = 1;
            for (k, (test, path)) in tests.iter().zip(&entry.tests).enumerate() {
                write_dataset(&dir, &test_name(k), test)?;
                manifest.variants.push(VariantRecord {
                    index: k,
                    train: train_name(None),
                    test: test_name(k),
                    test_rows: test.len(),
                    prevalences: None,
                    allocation: None,
                    gamma: None,
                    source: path.file_name().map(|f| f.to_string_lossy().into_owned()),
                });
            }
        }
        Source::Single(data) => match data.task() {
            Task::Classification { classes } => {
                let gap = cfg.min_gap.unwrap_or_else(|| default_min_gap(classes));
                let inj = inject_classification(data, cfg.test_fraction, cfg.variants, gap, &rng)?;
                fresh_dir(&dir)?;
                manifest.kind = ShiftKind::Prevalence;
                manifest.test_fraction = Some(cfg.test_fraction);
                manifest.min_gap = Some(gap);
                write_dataset(&dir, &train_name(None), &inj.train)?;
                summary.train_files = 1;
                for (k, v) in inj.variants.iter().enumerate() {
                    write_dataset(&dir, &test_name(k), &v.test)?;
                    manifest.variants.push(VariantRecord {
                        index: k,
                        train: train_name(None),
                        test: test_name(k),
                        test_rows: v.test.len(),
                        prevalences: Some(v.prevalences.probabilities.clone()),
                        allocation: Some(v.allocation.clone()),
                        gamma: None,
                        source: None,
                    });
                }
            }
            Task::Regression => {
                let pairs = regression_variants(data, cfg.variants, &cfg.gammas, cfg.test_fraction, &rng)?;
                fresh_dir(&dir)?;
                manifest.kind = ShiftKind::Sigmoid;
                for (k, pair) in pairs.iter().enumerate() {
                    write_dataset(&dir, &train_name(Some(k)), &pair.train)?;
                    write_dataset(&dir, &test_name(k), &pair.test)?;
                    manifest.variants.push(VariantRecord {
                        index: k,
                        train: train_name(Some(k)),
                        test: test_name(k),
                        test_rows: pair.test.len(),
                        prevalences: None,
                        allocation: None,
                        gamma: Some(pair.gamma),
                        source: None,
                    });
                }
                summary.train_files = pairs.len();
            }
        },
    }
    summary.test_files = manifest.variants.len();
    write_manifest(&dir, &manifest)?;
    Ok(summary)
}
