//! Friedman ranking and the Nemenyi critical difference.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Studentized range statistic divided by √2, K = 2..=10.
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `N × K`, 1 = best.
    pub ranks: Array2<f64>,
    pub average_ranks: Array1<f64>,
}

impl RankTable {
    pub fn named(mut self, methods: Vec<String>, datasets: Vec<String>) -> Result<Self> {
        if methods.len() != self.ranks.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ranks.ncols(),
                found: methods.len(),
            });
        }
        if datasets.len() != self.ranks.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.ranks.nrows(),
                found: datasets.len(),
            });
        }
        self.methods = methods;
        self.datasets = datasets;
        Ok(self)
    }

    pub fn n_datasets(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn n_methods(&self) -> usize {
        self.ranks.ncols()
    }
}

/// Ranks of one row; equal values share the mean of their positions.
pub fn rank_row(values: &[f64], lower_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if lower_is_better {
            c
        } else {
            c.reverse()
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end+1; their mean is exact in binary.
        let r = (start + end + 2) as f64 / 2.0;
        for &i in &order[start..=end] {
            ranks[i] = r;
        }
        start = end + 1;
    }
    ranks
}

pub fn friedman_ranks(scores: ArrayView2<'_, f64>, lower_is_better: bool) -> Result<RankTable> {
    let (n, k) = scores.dim();
    if n < 1 || k < 2 {
        return Err(Error::InsufficientData(format!("need ≥ 1 dataset and ≥ 2 methods, got {n} × {k}")));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank scores"));
    }
    let mut ranks = Array2::<f64>::zeros((n, k));
    for (i, row) in scores.outer_iter().enumerate() {
        let r = rank_row(&row.to_vec(), lower_is_better);
        ranks.row_mut(i).assign(&Array1::from(r));
    }
    let average_ranks = ranks.mean_axis(Axis(0)).expect("n ≥ 1");
    Ok(RankTable {
        methods: (0..k).map(|j| format!("m{j}")).collect(),
        datasets: (0..n).map(|i| format!("d{i}")).collect(),
        ranks,
        average_ranks,
    })
}

/// `χ²_F = 12N/(K(K+1)) [Σ R̄_j² − K(K+1)²/4]` and its upper-tail p-value
/// under χ² with `K − 1` degrees of freedom.
pub fn friedman_statistic(table: &RankTable) -> (f64, f64) {
    let n = table.n_datasets() as f64;
    let k = table.n_methods() as f64;
    let sum_sq: f64 = table.average_ranks.iter().map(|r| r * r).sum();
    let chi = (12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0)).max(0.0);
    (chi, chi_square_sf(chi, k - 1.0))
}

/// `P(X > x)` for `X ~ χ²(df)`.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`: power series below
/// `x < a + 1`, Lentz continued fraction above.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Tabulated `q_α(K)` for `α ∈ {0.05, 0.10}`, `2 ≤ K ≤ 10`.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::UnsupportedK { k, alpha });
    };
    if !(2..=10).contains(&k) {
        return Err(Error::UnsupportedK { k, alpha });
    }
    Ok(table[k - 2])
}

/// `q_α(K) √(K(K+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    let q = nemenyi_q(k, alpha)?;
    if n == 0 {
        return Err(Error::InsufficientData("critical difference needs N ≥ 1".into()));
    }
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Methods whose average rank trails the best by more than `cd`.
pub fn significance_marks(table: &RankTable, cd: f64) -> Vec<bool> {
    let best = table.average_ranks.iter().copied().fold(f64::INFINITY, f64::min);
    table.average_ranks.iter().map(|&r| r - best > cd).collect()
}

fn best_column(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v < row[best] {
            best = j;
        }
    }
    best
}

/// CSV: one row per dataset with its ranks and the best method, then an
/// `average` row and a `cd` row.
pub fn render_csv(table: &RankTable, cd: Option<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset,{},best", table.methods.join(","));
    for (name, row) in table.datasets.iter().zip(table.ranks.outer_iter()) {
        let row = row.to_vec();
        let cells: Vec<String> = row.iter().map(|r| format!("{r:.2}")).collect();
        let _ = writeln!(out, "{},{},{}", name, cells.join(","), table.methods[best_column(&row)]);
    }
    let avg = table.average_ranks.to_vec();
    let cells: Vec<String> = avg.iter().map(|r| format!("{r:.2}")).collect();
    let _ = writeln!(out, "average,{},{}", cells.join(","), table.methods[best_column(&avg)]);
    if let Some(cd) = cd {
        let _ = writeln!(out, "cd,{cd:.4}{}", ",".repeat(table.methods.len()));
    }
    out
}

/// Aligned plain text; `*` marks the best rank of each row.
pub fn render_text(table: &RankTable, cd: Option<f64>) -> String {
    let name_w = table
        .datasets
        .iter()
        .map(String::len)
        .chain(["average".len()])
        .max()
        .unwrap_or(7);
    let col_w = table.methods.iter().map(String::len).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "dataset");
    for m in &table.methods {
        let _ = write!(out, "  {m:>col_w$}");
    }
    out.push('\n');
    let line = |out: &mut String, name: &str, row: &[f64]| {
        let best = best_column(row);
        let _ = write!(out, "{name:<name_w$}");
        for (j, r) in row.iter().enumerate() {
            let cell = format!("{}{r:.2}", if j == best { "*" } else { "" });
            let _ = write!(out, "  {cell:>col_w$}");
        }
        out.push('\n');
    };
    for (name, row) in table.datasets.iter().zip(table.ranks.outer_iter()) {
        line(&mut out, name, &row.to_vec());
    }
    line(&mut out, "average", &table.average_ranks.to_vec());
    if let Some(cd) = cd {
        let _ = writeln!(out, "critical difference (Nemenyi): {cd:.4}");
    }
    out
}
