use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use qseg_core::features::{
    generate_synthetic_features, pca_fit, split_dataset, FeatureMatrix, Preprocessor, Scaler, SplitConfig,
    SyntheticSpec,
};
use qseg_core::rng::rng_from_seed;
use rand::Rng;
use std::f64::consts::PI;

/// Correlated random matrix: standard normals mixed by a random 10x10 map.
fn correlated(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
    let mut rng = rng_from_seed(seed);
    let mix: Vec<f64> = (0..cols * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let z: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        for j in 0..cols {
            data.push((0..cols).map(|k| mix[j * cols + k] * z[k]).sum::<f64>() + j as f64);
        }
    }
    FeatureMatrix::new(rows, cols, data, None).unwrap()
}

fn nalgebra_covariance(x: &FeatureMatrix) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(x.rows(), x.cols(), x.data());
    let mean = m.row_mean();
    let centered = DMatrix::from_fn(x.rows(), x.cols(), |i, j| m[(i, j)] - mean[j]);
    centered.transpose() * &centered / (x.rows() as f64 - 1.0)
}

#[test]
fn pca_matches_nalgebra_eigendecomposition() {
    for seed in 0..10 {
        let x = correlated(50, 10, seed);
        let pca = pca_fit(&x, 10).unwrap();
        let eig = SymmetricEigen::new(nalgebra_covariance(&x));
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        for (r, &i) in order.iter().enumerate() {
            assert!(
                (pca.explained_variance[r] - eig.eigenvalues[i]).abs() < 1e-6,
                "seed {seed} value {r}"
            );
            let v = eig.eigenvectors.column(i);
            let dot: f64 = (0..10).map(|k| v[k] * pca.components[r][k]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6, "seed {seed} vector {r}: {dot}");
        }
    }
}

#[test]
fn components_are_orthonormal_and_ordered() {
    let x = correlated(50, 10, 99);
    let pca = pca_fit(&x, 6).unwrap();
    for (a, ra) in pca.components.iter().enumerate() {
        for (b, rb) in pca.components.iter().enumerate() {
            let dot: f64 = ra.iter().zip(rb).map(|(p, q)| p * q).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-8);
        }
    }
    for w in pca.explained_variance.windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn explained_variance_is_bounded_by_total() {
    let x = correlated(50, 10, 5);
    let trace: f64 = nalgebra_covariance(&x).diagonal().sum();
    for d in 1..=10 {
        let pca = pca_fit(&x, d).unwrap();
        let kept: f64 = pca.explained_variance.iter().sum();
        assert!((pca.total_variance - trace).abs() < 1e-9);
        assert!(kept <= pca.total_variance + 1e-9);
        if d == 10 {
            assert!((kept - pca.total_variance).abs() < 1e-8);
        }
    }
}

#[test]
fn rank_deficient_data_keeps_full_variance_at_rank() {
    // Third column is the sum of the first two.
    let mut rng = rng_from_seed(8);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let a = rng.random_range(-3.0..3.0);
            let b = rng.random_range(-1.0..1.0);
            vec![a, b, a + b]
        })
        .collect();
    let x = FeatureMatrix::from_rows(&rows, None).unwrap();
    let pca = pca_fit(&x, 2).unwrap();
    let kept: f64 = pca.explained_variance.iter().sum();
    assert!((kept - pca.total_variance).abs() < 1e-8);
    assert!(!pca.rank_deficient);
    assert!(pca_fit(&x, 3).unwrap().rank_deficient);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_transform_is_identity(seed in any::<u64>(), cols in 1usize..7) {
        let x = correlated(30, cols, seed);
        let pca = pca_fit(&x, cols).unwrap();
        for row in x.iter_rows() {
            let back = pca.inverse_transform_row(&pca.transform_row(row).unwrap()).unwrap();
            for (a, b) in row.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scaling_own_data_lands_in_range(seed in any::<u64>(), cols in 1usize..6) {
        let x = correlated(25, cols, seed);
        let (scaler, scaled) = Scaler::fit_transform(&x).unwrap();
        prop_assert!(scaled.data().iter().all(|&v| (0.0..=PI).contains(&v)));
        for j in 0..cols {
            let col: Vec<f64> = scaled.iter_rows().map(|r| r[j]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo.abs() < 1e-12 && (hi - PI).abs() < 1e-12);
        }
        // Values outside the fitted range clamp and are counted.
        let far = vec![1e9; cols];
        let mut clamped = 0;
        let out = scaler.apply_row(&far, &mut clamped).unwrap();
        prop_assert_eq!(clamped, cols);
        prop_assert!(out.iter().all(|&v| v == PI));
    }

    #[test]
    fn preprocessor_output_is_valid_angles(seed in any::<u64>(), d in 1usize..5) {
        let x = correlated(40, 8, seed);
        let (pre, scaled) = Preprocessor::fit(&x, d).unwrap();
        prop_assert_eq!(scaled.cols(), d);
        prop_assert_eq!(pre.d_in(), 8);
        prop_assert!(scaled.data().iter().all(|&v| (0.0..=PI).contains(&v)));
    }

    #[test]
    fn splits_are_disjoint_and_cover(rows in 8usize..300, pos in 0.1..0.9f64, seed in any::<u64>()) {
        // The single feature is the row id.
        let labels: Vec<i8> = (0..rows).map(|i| if (i as f64) < rows as f64 * pos { 1 } else { -1 }).collect();
        let data: Vec<f64> = (0..rows).map(|i| i as f64).collect();
        let x = FeatureMatrix::new(rows, 1, data, Some(labels)).unwrap();
        let s = split_dataset(&x, &SplitConfig::default(), seed).unwrap();
        let mut ids: Vec<usize> = [&s.train, &s.val, &s.test]
            .iter()
            .flat_map(|m| m.data().iter().map(|&v| v as usize).collect::<Vec<_>>())
            .collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..rows).collect::<Vec<_>>());
        for m in [&s.train, &s.val, &s.test] {
            for (i, row) in m.iter_rows().enumerate() {
                prop_assert_eq!(m.label(i), x.label(row[0] as usize));
            }
        }
    }
}

#[test]
fn split_sizes_for_a_thousand_rows() {
    let x = generate_synthetic_features(
        &SyntheticSpec {
            rows: 1000,
            ..SyntheticSpec::default()
        },
        1,
    )
    .unwrap();
    let s = split_dataset(&x, &SplitConfig::default(), 2).unwrap();
    assert_eq!((s.test.rows(), s.val.rows(), s.train.rows()), (250, 187, 563));
}

#[test]
fn rebalanced_split_hits_requested_sizes() {
    let x = generate_synthetic_features(
        &SyntheticSpec {
            rows: 2000,
            ..SyntheticSpec::default()
        },
        3,
    )
    .unwrap();
    let cfg = SplitConfig {
        test_fraction: 167.0 / 792.0,
        val_fraction: 125.0 / 625.0,
        positive_fraction: Some(0.25),
        total: Some(792),
    };
    let s = split_dataset(&x, &cfg, 4).unwrap();
    assert_eq!((s.train.rows(), s.val.rows(), s.test.rows()), (500, 125, 167));
    let pos = s.train.positives() + s.val.positives() + s.test.positives();
    assert_eq!(pos, 198);
}

/// Accuracy of the nearest-class-mean rule fitted on the first half.
fn nearest_mean_accuracy(x: &FeatureMatrix) -> f64 {
    let half = x.rows() / 2;
    let d = x.cols();
    let mut means = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0.0f64; 2];
    for i in 0..half {
        let c = (x.label(i).unwrap() > 0) as usize;
        counts[c] += 1.0;
        for (m, v) in means[c].iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c].max(1.0));
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    let hits = (half..x.rows())
        .filter(|&i| {
            let guess = if dist(x.row(i), &means[1]) < dist(x.row(i), &means[0]) {
                1
            } else {
                -1
            };
            guess == x.label(i).unwrap()
        })
        .count();
    hits as f64 / (x.rows() - half) as f64
}

#[test]
fn separation_controls_learnability() {
    let spec = |separation| SyntheticSpec {
        rows: 2000,
        separation,
        ..SyntheticSpec::default()
    };
    let chance = nearest_mean_accuracy(&generate_synthetic_features(&spec(0.0), 7).unwrap());
    assert!((chance - 0.5).abs() < 0.05, "{chance}");
    let easy = nearest_mean_accuracy(&generate_synthetic_features(&spec(6.0), 7).unwrap());
    assert!(easy > 0.99, "{easy}");
}
