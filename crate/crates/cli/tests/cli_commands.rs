use std::path::Path;
use std::process::{Command, Output};

use covshift_cli::report::{append_rows, ReportRow};
use covshift_core::EvalResult;

fn covshift(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covshift"))
        .current_dir(dir)
        .env_remove("COVSHIFT_WORKERS")
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_pair(dir: &Path) {
    let mut tr = String::from("a,b,y\n");
    let mut te = String::from("a,b,y\n");
    for i in 0..40 {
        let t = i as f64 / 40.0;
        tr += &format!("{:.4},{:.4},{}\n", t, (7.0 * t).sin(), i % 2);
        te += &format!("{:.4},{:.4},{}\n", t + 0.3, (5.0 * t).cos(), i % 2);
    }
    std::fs::write(dir.join("train.csv"), tr).unwrap();
    std::fs::write(dir.join("test.csv"), te).unwrap();
    for f in ["train.json", "test.json"] {
        std::fs::write(dir.join(f), r#"{"task": "classification", "classes": 2}"#).unwrap();
    }
}

#[test]
fn help_is_success_and_bad_usage_is_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&covshift(dir.path(), &["--help"])), 0);
    assert_eq!(code(&covshift(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&covshift(dir.path(), &["run", "--seeds", "3..1", "--dataset", "x.csv"])), 1);
    assert_eq!(code(&covshift(dir.path(), &["run", "--methods", "SVM", "--dataset", "x.csv"])), 1);
    // No datasets at all.
    assert_eq!(code(&covshift(dir.path(), &["inject"])), 1);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"datasets": [{"path": "a.csv"}], "colour": 1}"#).unwrap();
    assert_eq!(code(&covshift(dir.path(), &["run", "--config", "c.json"])), 1);
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = covshift(dir.path(), &["run", "--dataset", "nowhere.csv", "--seeds", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("covshift inject"));
    assert_eq!(code(&covshift(dir.path(), &["estimate", "--train", "no.csv", "--test", "no.csv"])), 2);
    assert_eq!(code(&covshift(dir.path(), &["rank", "--report", "no.csv"])), 2);
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    std::fs::write(dir.path().join("kmm.json"), r#"{"method": "KMM", "qp_max_iter": 1, "qp_tol": 1e-14}"#).unwrap();
    let out = covshift(
        dir.path(),
        &["estimate", "--train", "train.csv", "--test", "test.csv", "--method", "KMM", "--spec", "kmm.json"],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn estimate_writes_unit_mean_kliep_weights() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = covshift(dir.path(), &["estimate", "--train", "train.csv", "--test", "test.csv", "--out", "w/weights.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let w = covshift_core::ImportanceVector::read_csv(&dir.path().join("w/weights.csv")).unwrap();
    assert_eq!(w.len(), 40);
    assert!((w.mean() - 1.0).abs() < 1e-6);
}

#[test]
fn toy_prints_both_errors_and_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = covshift(dir.path(), &["toy", "--seed", "3", "--out", "toy.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("MSLE phi(x)") && text.contains("MSLE phi(f(x))"));
    let csv = std::fs::read_to_string(dir.path().join("toy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

fn row(dataset: &str, variant: usize, phi: &str, dist: f64) -> ReportRow {
    ReportRow::ok(
        (dataset.into(), 7, variant, "KDE".into(), phi.into()),
        &EvalResult {
            actual_error: 0.2,
            weighted_estimate: 0.2 + dist,
            unweighted_estimate: 0.3,
            distance_weighted: dist,
            distance_unweighted: 0.1,
        },
    )
}

#[test]
fn rank_writes_one_table_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    // P always closest, then CP, then C: average ranks (3, 1, 2).
    let mut rows = Vec::new();
    for d in ["d1", "d2", "d3", "d4"] {
        for v in 0..3 {
            rows.push(row(d, v, "C", 0.09));
            rows.push(row(d, v, "P", 0.01));
            rows.push(row(d, v, "CP", 0.05));
        }
    }
    append_rows(&report, &rows).unwrap();
    let out = covshift(dir.path(), &["rank", "--report", "report.csv", "--out", "ranks"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ranks/ranks_KDE.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].contains("KDE-C") && lines[0].contains("KDE-CP"));
    assert!(lines.iter().any(|l| l.starts_with("average,3") && l.contains(",1") && l.contains(",2")), "{csv}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("Friedman chi-square"));
}

#[test]
fn rank_with_one_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    append_rows(&dir.path().join("r.csv"), &[row("d1", 0, "C", 0.1), row("d1", 0, "P", 0.2)]).unwrap();
    assert_eq!(code(&covshift(dir.path(), &["rank", "--report", "r.csv"])), 2);
}
