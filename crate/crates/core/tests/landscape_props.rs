mod common;

use common::{candidate_breakpoints, dyadic_intervals, kth_largest_tent};
use nalgebra::DMatrix;
use plstat_core::landscape::{
    evaluate, landscape_distance, landscape_from_intervals, landscape_integral, landscape_kernel, mean_landscape, Norm,
};
use plstat_core::rng;
use plstat_core::PersistenceLandscape;
use proptest::prelude::*;
use rand::Rng;

fn landscape(intervals: &[(f64, f64)]) -> PersistenceLandscape {
    landscape_from_intervals(1, intervals).unwrap()
}

const NORMS: [Norm; 5] = [Norm::P(1.0), Norm::P(2.0), Norm::P(1.5), Norm::P(3.0), Norm::Infinity];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn levels_are_kth_largest_tent_values(seed in any::<u64>()) {
        let intervals = dyadic_intervals(seed, 8);
        let l = landscape(&intervals);
        prop_assert!(l.n_levels() <= intervals.len());
        let mut r = rng::stream(seed, 3);
        let mut ts: Vec<f64> = (0..1000).map(|_| r.gen_range(-0.5..6.5)).collect();
        ts.extend(candidate_breakpoints(&intervals));
        for &t in &ts {
            for k in 1..=intervals.len() + 1 {
                let want = kth_largest_tent(&intervals, k, t);
                prop_assert!((evaluate(&l, k, t) - want).abs() <= 1e-12, "k={} t={}", k, t);
            }
        }
    }

    #[test]
    fn levels_are_ordered_and_one_lipschitz(seed in any::<u64>()) {
        let intervals = dyadic_intervals(seed, 8);
        let l = landscape(&intervals);
        for level in &l.levels {
            prop_assert!(level.max_abs_slope() <= 1.0 + 1e-12);
        }
        for t in candidate_breakpoints(&intervals) {
            for k in 1..l.n_levels() {
                prop_assert!(evaluate(&l, k, t) >= evaluate(&l, k + 1, t));
            }
        }
    }

    #[test]
    fn total_area_equals_sum_of_tent_areas(seed in any::<u64>()) {
        let intervals = dyadic_intervals(seed, 8);
        let tents: f64 = intervals.iter().map(|&(a, b)| (b - a) * (b - a) / 4.0).sum();
        // dyadic endpoints make both sides exact
        prop_assert_eq!(landscape_integral(&landscape(&intervals)), tents);
    }

    #[test]
    fn distances_are_metrics(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (
            landscape(&dyadic_intervals(s1, 8)),
            landscape(&dyadic_intervals(s2, 8)),
            landscape(&dyadic_intervals(s3, 8)),
        );
        for norm in NORMS {
            let ab = landscape_distance(&a, &b, norm).unwrap();
            let ba = landscape_distance(&b, &a, norm).unwrap();
            let bc = landscape_distance(&b, &c, norm).unwrap();
            let ac = landscape_distance(&a, &c, norm).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(landscape_distance(&a, &a, norm).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-9, "{:?}: {} > {} + {}", norm, ac, ab, bc);
        }
    }

    #[test]
    fn two_norm_agrees_with_kernel(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (landscape(&dyadic_intervals(s1, 8)), landscape(&dyadic_intervals(s2, 8)));
        let d = landscape_distance(&a, &b, Norm::P(2.0)).unwrap();
        let polar = landscape_kernel(&a, &a).unwrap() + landscape_kernel(&b, &b).unwrap()
            - 2.0 * landscape_kernel(&a, &b).unwrap();
        prop_assert!((d * d - polar).abs() <= 1e-9);
    }

    #[test]
    fn mean_is_pointwise_mean(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let sets = [dyadic_intervals(s1, 6), dyadic_intervals(s2, 6), dyadic_intervals(s3, 6)];
        let ls: Vec<_> = sets.iter().map(|s| landscape(s)).collect();
        let mean = mean_landscape(&ls).unwrap();
        let mut r = rng::stream(s1 ^ s2, 4);
        for _ in 0..200 {
            let t = r.gen_range(-0.5..6.5);
            for k in 1..=7 {
                let want = sets.iter().map(|s| kth_largest_tent(s, k, t)).sum::<f64>() / 3.0;
                prop_assert!((evaluate(&mean, k, t) - want).abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kernel_gram_matrices_are_positive_semidefinite(seed in any::<u64>()) {
        let ls: Vec<_> = (0..6).map(|i| landscape(&dyadic_intervals(seed.wrapping_add(i), 8))).collect();
        let gram = DMatrix::from_fn(6, 6, |i, j| landscape_kernel(&ls[i], &ls[j]).unwrap());
        let scale = gram.diagonal().max().max(1.0);
        for e in gram.symmetric_eigenvalues().iter() {
            prop_assert!(*e >= -1e-9 * scale);
        }
    }
}
