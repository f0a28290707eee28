//! Controlled covariate-shift injection.
//!
//! Classification: a stratified base split, then each test variant resamples
//! the base test pool class by class to hit a randomly drawn prevalence
//! vector, so `P(x|y)` is untouched. Regression: a sigmoid of the normalized
//! target decides which side each example lands on.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const PREVALENCE_MIN: f64 = 0.05;
pub const PREVALENCE_MAX: f64 = 0.95;
pub const PREVALENCE_BUDGET: usize = 100_000;
pub const DEFAULT_TEST_FRACTION: f64 = 0.33;
pub const SPLIT_RETRIES: usize = 100;

/// `1/(10m)`.
pub fn default_min_gap(classes: usize) -> f64 {
    1.0 / (10.0 * classes as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceVector {
    pub probabilities: Vec<f64>,
    pub min_gap: f64,
}

fn prevalence_ok(p: &[f64], gap: f64) -> bool {
    if p.iter().any(|&v| !(PREVALENCE_MIN..=PREVALENCE_MAX).contains(&v)) {
        return false;
    }
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if (p[i] - p[j]).abs() < gap {
                return false;
            }
        }
    }
    true
}

/// Uniform draw from the probability simplex, rejected until every entry lies
/// in `[0.05, 0.95]` and all pairwise gaps are at least `min_gap`.
pub fn sample_prevalences(classes: usize, min_gap: f64, rng: &mut RngStream) -> Result<PrevalenceVector> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!("need at least two classes, got {classes}")));
    }
    if !(min_gap >= 0.0 && min_gap.is_finite()) {
        return Err(Error::InvalidParameter(format!("minimum gap must be ≥ 0, got {min_gap}")));
    }
    // Tightest packing: entries 0.05, 0.05 + g, ..., must fit under the bounds.
    let m = classes as f64;
    let least_sum = PREVALENCE_MIN * m + min_gap * m * (m - 1.0) / 2.0;
    let most_sum = PREVALENCE_MAX * m - min_gap * m * (m - 1.0) / 2.0;
    if least_sum > 1.0 || most_sum < 1.0 || PREVALENCE_MIN + (m - 1.0) * min_gap > PREVALENCE_MAX {
        return Err(Error::InfeasibleConstraints(format!(
            "{classes} prevalences in [0.05, 0.95] with gap {min_gap} cannot sum to 1"
        )));
    }
    for _ in 0..PREVALENCE_BUDGET {
        let draws: Vec<f64> = (0..classes).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let p: Vec<f64> = draws.iter().map(|d| d / total).collect();
        if prevalence_ok(&p, min_gap) {
            return Ok(PrevalenceVector {
                probabilities: p,
                min_gap,
            });
        }
    }
    Err(Error::InfeasibleConstraints(format!(
        "no admissible prevalence vector in {PREVALENCE_BUDGET} draws"
    )))
}

/// Highest-averages apportionment: each seat goes to the class with the
/// largest `p_c / (s_c + 1)`; ties go to the lowest index.
pub fn dhondt_allocate(prevalences: &[f64], seats: usize) -> Result<Vec<usize>> {
    if prevalences.is_empty() || seats == 0 {
        return Err(Error::InvalidParameter("need at least one class and one seat".into()));
    }
    if prevalences.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter(format!("prevalences must be positive, got {prevalences:?}")));
    }
    let mut out = vec![0usize; prevalences.len()];
    for _ in 0..seats {
        let mut best = 0;
        let mut best_q = prevalences[0] / (out[0] + 1) as f64;
        for (c, &p) in prevalences.iter().enumerate().skip(1) {
            let q = p / (out[c] + 1) as f64;
            // Quotients within round-off of each other count as tied.
            if q > best_q * (1.0 + 1e-12) {
                best = c;
                best_q = q;
            }
        }
        out[best] += 1;
    }
    Ok(out)
}

/// One shifted test set.
#[derive(Debug, Clone)]
pub struct ClassVariant {
    pub prevalences: PrevalenceVector,
    pub allocation: Vec<usize>,
    /// Rows of the source dataset, grouped by class.
    pub source_indices: Vec<usize>,
    pub test: Dataset,
}

#[derive(Debug, Clone)]
pub struct ClassificationInjection {
    pub train: Dataset,
    pub train_indices: Vec<usize>,
    pub pool_indices: Vec<usize>,
    pub variants: Vec<ClassVariant>,
}

fn stratified_split(labels: &[usize], classes: usize, test_fraction: f64, rng: &mut RngStream) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut pool = Vec::new();
    for c in 0..classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        rows.shuffle(rng);
        let n = rows.len();
        let mut k = (test_fraction * n as f64).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        }
        pool.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    pool.sort_unstable();
    (train, pool)
}

/// Builds one training set and `variants` prevalence-shifted test sets.
pub fn inject_classification(
    source: &Dataset,
    test_fraction: f64,
    variants: usize,
    min_gap: f64,
    rng: &RngStream,
) -> Result<ClassificationInjection> {
    let Task::Classification { classes } = source.task() else {
        return Err(Error::TaskMismatch("classification injection needs a classification dataset"));
    };
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let labels = source.labels();
    let (train_indices, pool_indices) = stratified_split(&labels, classes, test_fraction, &mut rng.child("split"));
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in &pool_indices {
        by_class[labels[i]].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::ClassMissingInPool(c));
    }

    let mut out = Vec::with_capacity(variants);
    for k in 0..variants {
        let stream = rng.child("variants").child_index(k as u64);
        let prevalences = sample_prevalences(classes, min_gap, &mut stream.child("prevalence"))?;
        let allocation = dhondt_allocate(&prevalences.probabilities, pool_indices.len())?;
        let mut draw = stream.child("draw");
        let mut source_indices = Vec::with_capacity(pool_indices.len());
        for (c, &count) in allocation.iter().enumerate() {
            let rows = &by_class[c];
            for _ in 0..count {
                source_indices.push(rows[draw.random_range(0..rows.len())]);
            }
        }
        let test = source.select(&source_indices);
        out.push(ClassVariant {
            prevalences,
            allocation,
            source_indices,
            test,
        });
    }
    Ok(ClassificationInjection {
        train: source.select(&train_indices),
        train_indices,
        pool_indices,
        variants: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidSplitConfig {
    pub gamma: f64,
    /// Kept for the record; the sigmoid alone decides each assignment.
    pub test_fraction: f64,
}

impl Default for SigmoidSplitConfig {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub gamma: f64,
}

/// `1/(1 + e^{−γỹ})`.
pub fn test_probability(normalized_target: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + (-gamma * normalized_target).exp())
}

/// Min-max map onto `[−1, 1]`.
pub fn normalize_targets(y: &[f64]) -> Result<Vec<f64>> {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InsufficientData("need at least two distinct targets".into()));
    }
    Ok(y.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect())
}

/// Sends high (γ > 0) or low (γ < 0) targets preferentially to the test side.
pub fn inject_regression(source: &Dataset, cfg: &SigmoidSplitConfig, rng: &mut RngStream) -> Result<SplitPair> {
    if source.task() != Task::Regression {
        return Err(Error::TaskMismatch("sigmoid split needs a regression dataset"));
    }
    if !(cfg.gamma != 0.0 && cfg.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be nonzero, got {}", cfg.gamma)));
    }
    let yt = normalize_targets(source.targets().as_slice().expect("contiguous targets"))?;
    let probs: Vec<f64> = yt.iter().map(|&v| test_probability(v, cfg.gamma)).collect();
    for _ in 0..SPLIT_RETRIES {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, &p) in probs.iter().enumerate() {
            if rng.random::<f64>() < p {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        if !train.is_empty() && !test.is_empty() {
            return Ok(SplitPair {
                train: source.select(&train),
                test: source.select(&test),
                train_indices: train,
                test_indices: test,
                gamma: cfg.gamma,
            });
        }
    }
    Err(Error::DegenerateSplit(SPLIT_RETRIES))
}

/// `variants` independent sigmoid splits, cycling through `gammas`.
pub fn regression_variants(
    source: &Dataset,
    variants: usize,
    gammas: &[f64],
    test_fraction: f64,
    rng: &RngStream,
) -> Result<Vec<SplitPair>> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("need at least one gamma".into()));
    }
    (0..variants)
        .map(|k| {
            let cfg = SigmoidSplitConfig {
                gamma: gammas[k % gammas.len()],
                test_fraction,
            };
            inject_regression(source, &cfg, &mut rng.child("variants").child_index(k as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    #[test]
    fn binary_prevalence() {
        let mut rng = RngStream::new(1);
        let p = sample_prevalences(2, 0.05, &mut rng).unwrap();
        let v = &p.probabilities;
        assert!((v[0] + v[1] - 1.0).abs() < 1e-12);
        assert!((2.0 * v[0] - 1.0).abs() >= 0.05);
    }

    #[test]
    fn infeasible_gap_is_reported_up_front() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            sample_prevalences(3, 0.5, &mut rng),
            Err(Error::InfeasibleConstraints(_))
        ));
    }

    #[test]
    fn dhondt_small_cases() {
        assert_eq!(dhondt_allocate(&[0.6, 0.3, 0.1], 10).unwrap(), vec![6, 3, 1]);
        assert_eq!(dhondt_allocate(&[1.0], 7).unwrap(), vec![7]);
        assert_eq!(dhondt_allocate(&[0.5, 0.5], 4).unwrap(), vec![2, 2]);
        assert_eq!(dhondt_allocate(&[0.5, 0.5], 3).unwrap(), vec![2, 1]);
    }

    #[test]
    fn sigmoid_probabilities() {
        assert_eq!(test_probability(0.0, 5.0), 0.5);
        assert!((test_probability(1.0, 5.0) - 0.99331).abs() < 1e-5);
        assert!((test_probability(1.0, -5.0) - 0.00669).abs() < 1e-5);
    }

    #[test]
    fn normalization_hits_both_ends() {
        let t = normalize_targets(&[3.0, 5.0, 4.0]).unwrap();
        assert_eq!(t, vec![-1.0, 1.0, 0.0]);
        assert!(normalize_targets(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn regression_split_partitions_rows() {
        let n = 50;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = Array1::from_shape_fn(n, |i| i as f64);
        let data = Dataset::regression(x, y).unwrap();
        let pair = inject_regression(&data, &SigmoidSplitConfig::default(), &mut RngStream::new(3)).unwrap();
        let mut all = [pair.train_indices.clone(), pair.test_indices.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn class_missing_from_pool() {
        let x = Array2::from_shape_fn((5, 1), |(i, _)| i as f64);
        let data = Dataset::classification(x, &[0, 0, 0, 0, 1], 2).unwrap();
        assert!(matches!(
            inject_classification(&data, 0.33, 1, 0.05, &RngStream::new(0)),
            Err(Error::ClassMissingInPool(1))
        ));
    }
}
