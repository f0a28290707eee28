//! Friedman tables over φ-mode triplets: for each method, its -C, -P and -CP
//! variants are ranked by `distance_weighted` within every (dataset, seed,
//! variant), ranks are averaged per dataset, and the Nemenyi CD is attached.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use covshift_core::stats::{friedman_statistic, nemenyi_cd, rank_row, render_csv, render_text};
use covshift_core::{Error, PhiMode, RankTable};
use ndarray::{Array1, Array2, Axis};

use crate::error::CliResult;
use crate::report::{read_report, ReportRow, Status};

#[derive(Debug, Clone)]
pub struct MethodRanking {
    pub method: String,
    pub table: RankTable,
    pub cd: f64,
    pub chi_square: f64,
    pub p_value: f64,
    /// Complete (dataset, seed, variant) groups that entered the ranks.
    pub groups_used: usize,
    /// Groups dropped because some φ-mode failed or is missing.
    pub groups_dropped: usize,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// One ranking per method, in order of first appearance in the report.
pub fn rank_rows(rows: &[ReportRow], alpha: f64) -> CliResult<Vec<MethodRanking>> {
    let methods = first_seen(rows.iter().map(|r| r.method.as_str()));
    let mut out = Vec::new();
    for method in methods {
        let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.method == method).collect();
        let modes: Vec<&str> = PhiMode::ALL
            .iter()
            .map(|m| m.suffix())
            .filter(|s| mine.iter().any(|r| r.phi_mode == *s))
            .collect();
        let datasets = first_seen(mine.iter().map(|r| r.dataset.as_str()));
        let k = modes.len();

        let mut groups: BTreeMap<(usize, u64, usize), Vec<Option<f64>>> = BTreeMap::new();
        for r in &mine {
            let Some(col) = modes.iter().position(|m| *m == r.phi_mode) else { continue };
            let d = datasets.iter().position(|d| *d == r.dataset).expect("collected above");
            let value = match (r.status, r.distance_weighted) {
                (Status::Ok, Some(v)) if v.is_finite() => Some(v),
                _ => None,
            };
            groups.entry((d, r.seed, r.variant)).or_insert_with(|| vec![None; k])[col] = value;
        }

        let mut sums = Array2::<f64>::zeros((datasets.len(), k));
        let mut counts = vec![0usize; datasets.len()];
        let mut dropped = 0;
        for ((d, _, _), values) in &groups {
            let Some(values) = values.iter().copied().collect::<Option<Vec<f64>>>() else {
                dropped += 1;
                continue;
            };
            let ranks = rank_row(&values, true);
            sums.row_mut(*d).scaled_add(1.0, &Array1::from(ranks));
            counts[*d] += 1;
        }
        let kept: Vec<usize> = (0..datasets.len()).filter(|&d| counts[d] > 0).collect();
        for d in (0..datasets.len()).filter(|d| counts[*d] == 0) {
            log::warn!("{method}: dataset {} has no complete triplet and is left out", datasets[d]);
        }
        if kept.len() < 2 || k < 2 {
            return Err(Error::InsufficientData(format!(
                "{method}: ranking needs ≥ 2 datasets and ≥ 2 phi modes with complete results, got {} × {k}",
                kept.len()
            ))
            .into());
        }
        let mut ranks = Array2::<f64>::zeros((kept.len(), k));
        for (i, &d) in kept.iter().enumerate() {
            ranks.row_mut(i).assign(&(&sums.row(d) / counts[d] as f64));
        }
        let average_ranks = ranks.mean_axis(Axis(0)).expect("≥ 2 rows");
        let table = RankTable {
            methods: modes.iter().map(|m| format!("{method}-{m}")).collect(),
            datasets: kept.iter().map(|&d| datasets[d].clone()).collect(),
            ranks,
            average_ranks,
        };
        let cd = nemenyi_cd(k, kept.len(), alpha)?;
        let (chi_square, p_value) = friedman_statistic(&table);
        out.push(MethodRanking {
            method,
            table,
            cd,
            chi_square,
            p_value,
            groups_used: counts.iter().sum(),
            groups_dropped: dropped,
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("report has no rows".into()).into());
    }
    Ok(out)
}

pub fn render_rankings(rankings: &[MethodRanking]) -> String {
    let mut text = String::new();
    for r in rankings {
        let _ = writeln!(text, "== {} ==", r.method);
        text.push_str(&render_text(&r.table, Some(r.cd)));
        let _ = writeln!(
            text,
            "Friedman chi-square {:.4} (p = {:.4}); {} triplets used, {} dropped",
            r.chi_square, r.p_value, r.groups_used, r.groups_dropped
        );
        text.push('\n');
    }
    text
}

/// Ranks a report and writes `ranks_<METHOD>.csv` per method into `out_dir`.
/// Returns the written paths and the plain-text rendering.
pub fn cmd_rank(report: &Path, out_dir: &Path, alpha: f64) -> CliResult<(Vec<PathBuf>, String)> {
    if !report.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("report {} does not exist", report.display()),
        ))
        .into());
    }
    let rows = read_report(report)?;
    let rankings = rank_rows(&rows, alpha)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for r in &rankings {
        let path = out_dir.join(format!("ranks_{}.csv", r.method));
        std::fs::write(&path, render_csv(&r.table, Some(r.cd)))?;
        written.push(path);
    }
    Ok((written, render_rankings(&rankings)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use covshift_core::EvalResult;

    fn row(dataset: &str, variant: usize, phi: &str, dist: f64) -> ReportRow {
        ReportRow::ok(
            (dataset.into(), 1, variant, "KLIEP".into(), phi.into()),
            &EvalResult {
                actual_error: 0.0,
                weighted_estimate: dist,
                unweighted_estimate: 0.0,
                distance_weighted: dist,
                distance_unweighted: 0.0,
            },
        )
    }

    #[test]
    fn consistent_ordering_gives_one_two_three() {
        let mut rows = Vec::new();
        for d in ["a", "b", "c"] {
            for v in 0..4 {
                rows.push(row(d, v, "C", 0.1));
                rows.push(row(d, v, "P", 0.2));
                rows.push(row(d, v, "CP", 0.3));
            }
        }
        let r = &rank_rows(&rows, 0.05).unwrap()[0];
        assert_eq!(r.table.average_ranks.to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(r.table.n_datasets(), 3);
        assert_eq!(r.table.methods, vec!["KLIEP-C", "KLIEP-P", "KLIEP-CP"]);
    }

    #[test]
    fn failed_member_drops_the_triplet() {
        let mut rows = vec![];
        for d in ["a", "b"] {
            rows.push(row(d, 0, "C", 0.1));
            rows.push(row(d, 0, "P", 0.2));
            rows.push(row(d, 1, "C", 0.3));
            rows.push(row(d, 1, "P", 0.2));
        }
        rows[3] = ReportRow::failed(("a".into(), 1, 1, "KLIEP".into(), "P".into()), "boom".into());
        let r = &rank_rows(&rows, 0.05).unwrap()[0];
        assert_eq!(r.groups_dropped, 1);
        assert_eq!(r.table.ranks.row(0).to_vec(), vec![1.0, 2.0]);
        assert_eq!(r.table.ranks.row(1).to_vec(), vec![1.5, 1.5]);
    }

    #[test]
    fn single_dataset_is_insufficient() {
        let rows = vec![row("a", 0, "C", 0.1), row("a", 0, "P", 0.2)];
        assert!(rank_rows(&rows, 0.05).is_err());
    }
}
