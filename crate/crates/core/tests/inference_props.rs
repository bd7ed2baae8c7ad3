mod common;

use nalgebra::DMatrix;
use plstat_core::inference::{binomial, pca, permutation_test, NullKind, PermutationConfig};
use plstat_core::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn exhaustive() -> PermutationConfig {
    PermutationConfig { exhaustive_limit: 1_000_000, monte_carlo_samples: 0, seed: 0 }
}

fn groups(seed: u64, n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng::stream(seed, 5);
    let shift = r.gen_range(-1.0..1.0);
    let a = (0..n1).map(|_| r.gen_range(0.0..1.0)).collect();
    let b = (0..n2).map(|_| r.gen_range(0.0..1.0) + shift).collect();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn null_enumerates_every_split(seed in any::<u64>(), n1 in 2usize..7, n2 in 2usize..7) {
        let (a, b) = groups(seed, n1, n2);
        let r = permutation_test(&a, &b, &exhaustive()).unwrap();
        let total = binomial((n1 + n2) as u64, n1 as u64) as usize;
        let expected = if n1 == n2 { total / 2 } else { total };
        prop_assert_eq!(r.m, expected);
        prop_assert_eq!(r.null_distribution.len(), expected);
        prop_assert_eq!(r.kind, if n1 == n2 { NullKind::ExhaustiveCollapsed } else { NullKind::Exhaustive });
        prop_assert!(r.p_value >= 1.0 / r.m as f64 && r.p_value <= 1.0);
    }

    #[test]
    fn p_value_is_invariant_under_affine_maps(
        seed in any::<u64>(), n1 in 2usize..7, n2 in 2usize..7,
        scale in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], shift in -100.0f64..100.0,
    ) {
        let (a, b) = groups(seed, n1, n2);
        let map = |xs: &[f64]| xs.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        let plain = permutation_test(&a, &b, &exhaustive()).unwrap();
        let mapped = permutation_test(&map(&a), &map(&b), &exhaustive()).unwrap();
        prop_assert_eq!(plain.p_value, mapped.p_value);
        prop_assert!((plain.t_obs - mapped.t_obs).abs() <= 1e-9 * plain.t_obs.max(1.0));
    }

    #[test]
    fn swapping_groups_changes_nothing(seed in any::<u64>(), n1 in 2usize..7, n2 in 2usize..7) {
        let (a, b) = groups(seed, n1, n2);
        let ab = permutation_test(&a, &b, &exhaustive()).unwrap();
        let ba = permutation_test(&b, &a, &exhaustive()).unwrap();
        prop_assert_eq!(ab.t_obs, ba.t_obs);
        prop_assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn monte_carlo_p_value_is_bounded_and_reproducible(seed in any::<u64>()) {
        let (a, b) = groups(seed, 12, 12);
        let config = PermutationConfig { exhaustive_limit: 10, monte_carlo_samples: 500, seed };
        let r = permutation_test(&a, &b, &config).unwrap();
        prop_assert_eq!(r.kind, NullKind::MonteCarlo);
        prop_assert_eq!(r.m, 501);
        prop_assert!(r.p_value >= 1.0 / 501.0);
        prop_assert_eq!(r.null_distribution, permutation_test(&a, &b, &config).unwrap().null_distribution);
    }

    #[test]
    fn pca_scores_follow_sample_order(seed in any::<u64>(), n in 3usize..12, p in 2usize..20, standardize in any::<bool>()) {
        let mut r = rng::stream(seed, 6);
        let x = DMatrix::from_fn(n, p, |_, j| r.gen_range(-1.0..1.0) * (j + 1) as f64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let shuffled = DMatrix::from_fn(n, p, |i, j| x[(order[i], j)]);
        let a = pca(&x, standardize).unwrap();
        let b = pca(&shuffled, standardize).unwrap();
        prop_assert_eq!(a.scores.ncols(), b.scores.ncols());
        for c in 0..a.scores.ncols() {
            // well-separated eigenvalues only; near-ties may rotate components
            let gap = |k: usize| (a.eigenvalues[c] - a.eigenvalues[k]).abs() / a.eigenvalues[0];
            if (c > 0 && gap(c - 1) < 1e-6) || (c + 1 < a.eigenvalues.len() && gap(c + 1) < 1e-6) {
                continue;
            }
            let col_a: Vec<f64> = order.iter().map(|&i| a.scores[(i, c)]).collect();
            let col_b: Vec<f64> = (0..n).map(|i| b.scores[(i, c)]).collect();
            let same = col_a.iter().zip(&col_b).all(|(x, y)| (x - y).abs() <= 1e-7);
            let flipped = col_a.iter().zip(&col_b).all(|(x, y)| (x + y).abs() <= 1e-7);
            prop_assert!(same || flipped, "component {}", c);
        }
    }
}
