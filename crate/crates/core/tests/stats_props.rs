use covshift_core::stats::{
    chi_square_sf, friedman_ranks, friedman_statistic, nemenyi_cd, rank_row, render_csv, significance_marks,
};
use ndarray::Array2;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Rank by counting: 1 + (#strictly better) + (#tied others)/2.
fn counting_rank(values: &[f64], lower_is_better: bool) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let better = values.iter().filter(|&&u| if lower_is_better { u < v } else { u > v }).count();
            let tied = values.iter().filter(|&&u| u == v).count() - 1;
            1.0 + better as f64 + tied as f64 / 2.0
        })
        .collect()
}

// Few distinct values so ties are common.
fn score_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec((0u8..5).prop_map(|v| v as f64 * 0.25), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ranks_match_counting_and_sum_to_triangle(row in (2usize..8).prop_flat_map(score_row), lower in any::<bool>()) {
        let k = row.len() as f64;
        let got = rank_row(&row, lower);
        prop_assert_eq!(&got, &counting_rank(&row, lower));
        prop_assert_eq!(got.iter().sum::<f64>(), k * (k + 1.0) / 2.0);
    }

    #[test]
    fn flipping_sign_and_direction_gives_the_same_ranks(row in (2usize..8).prop_flat_map(score_row)) {
        let negated: Vec<f64> = row.iter().map(|v| -v).collect();
        prop_assert_eq!(rank_row(&row, true), rank_row(&negated, false));
    }

    #[test]
    fn average_ranks_sum_to_triangle(rows in (2usize..6).prop_flat_map(|k| proptest::collection::vec(score_row(k), 1..12))) {
        let (n, k) = (rows.len(), rows[0].len());
        let scores = Array2::from_shape_vec((n, k), rows.concat()).unwrap();
        let table = friedman_ranks(scores.view(), true).unwrap();
        let kf = k as f64;
        prop_assert!((table.average_ranks.sum() - kf * (kf + 1.0) / 2.0).abs() < 1e-12);
        let (chi, p) = friedman_statistic(&table);
        prop_assert!(chi >= 0.0 && (0.0..=1.0).contains(&p));
    }

    #[test]
    fn chi_square_tail_matches_statrs(x in 0.01f64..80.0, df in 1usize..12) {
        let want = ChiSquared::new(df as f64).unwrap().sf(x);
        let got = chi_square_sf(x, df as f64);
        prop_assert!((got - want).abs() <= 1e-10, "x={x} df={df}: {got} vs {want}");
    }
}

#[test]
fn identical_rankings_give_chi_square_twenty() {
    // R̄ = (1, 2, 3), N = 10, K = 3: 12·10/12 · (14 − 12) = 20.
    let scores = Array2::from_shape_fn((10, 3), |(_, j)| j as f64);
    let table = friedman_ranks(scores.view(), true).unwrap();
    let (chi, p) = friedman_statistic(&table);
    assert!((chi - 20.0).abs() < 1e-12);
    assert!((p - (-10.0f64).exp()).abs() < 1e-15, "χ²(2) tail is e^(−x/2)");
}

#[test]
fn equal_average_ranks_give_zero_statistic() {
    let scores = Array2::from_shape_fn((6, 3), |(i, j)| ((i + j) % 3) as f64);
    let (chi, p) = friedman_statistic(&friedman_ranks(scores.view(), true).unwrap());
    assert_eq!(chi, 0.0);
    assert_eq!(p, 1.0);
}

#[test]
fn p_value_shrinks_as_datasets_grow() {
    let mut last = 1.0;
    for n in [3, 6, 12, 24] {
        let scores = Array2::from_shape_fn((n, 3), |(i, j)| if i % 3 == 0 { (2 - j) as f64 } else { j as f64 });
        let (_, p) = friedman_statistic(&friedman_ranks(scores.view(), true).unwrap());
        assert!(p < last, "N = {n}: {p} ≥ {last}");
        last = p;
    }
}

#[test]
fn critical_differences_reported_for_three_methods() {
    assert!((nemenyi_cd(3, 10, 0.05).unwrap() - 1.0483).abs() <= 1e-3);
    assert!((nemenyi_cd(3, 11, 0.05).unwrap() - 0.9995).abs() <= 1e-3);
    assert!((nemenyi_cd(3, 15, 0.05).unwrap() - 0.8559).abs() <= 1e-3);
}

#[test]
fn critical_difference_is_monotone() {
    for k in 2..=10 {
        for n in 1..40 {
            assert!(nemenyi_cd(k, n + 1, 0.05).unwrap() < nemenyi_cd(k, n, 0.05).unwrap());
            assert!(nemenyi_cd(k, n, 0.10).unwrap() < nemenyi_cd(k, n, 0.05).unwrap());
        }
        if k < 10 {
            assert!(nemenyi_cd(k + 1, 10, 0.05).unwrap() > nemenyi_cd(k, 10, 0.05).unwrap());
        }
    }
    assert!(nemenyi_cd(11, 10, 0.05).is_err());
    assert!(nemenyi_cd(3, 10, 0.01).is_err());
}

#[test]
fn marks_and_csv_layout() {
    let scores = Array2::from_shape_fn((10, 3), |(_, j)| j as f64);
    let table = friedman_ranks(scores.view(), true)
        .unwrap()
        .named(vec!["a".into(), "b".into(), "c".into()], (0..10).map(|i| format!("d{i}")).collect())
        .unwrap();
    let cd = nemenyi_cd(3, 10, 0.05).unwrap();
    assert_eq!(significance_marks(&table, cd), vec![false, false, true]);
    let csv = render_csv(&table, Some(cd));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dataset,a,b,c,best");
    assert_eq!(lines[1], "d0,1.00,2.00,3.00,a");
    assert_eq!(lines[11], "average,1.00,2.00,3.00,a");
    assert!(lines[12].starts_with("cd,1.04"));
}
