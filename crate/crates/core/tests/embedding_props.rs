mod common;

use common::random_points;
use plstat_core::data::{euclidean_distances, PointCloud};
use plstat_core::embedding::{geodesic_distances, isomap, Neighborhood};
use plstat_core::rng;
use proptest::prelude::*;
use rand::Rng;

/// Noisy samples from a rolled-up rectangle in R^3.
fn swiss_roll(n: usize, seed: u64) -> PointCloud {
    let mut r = rng::stream(seed, 10);
    PointCloud::new(
        (0..n)
            .map(|_| {
                let s: f64 = r.gen_range(1.5..4.5);
                let h: f64 = r.gen_range(0.0..3.0);
                vec![s * s.cos(), h, s * s.sin()]
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn geodesics_form_a_metric(seed in any::<u64>(), n in 5usize..30, k in 2usize..6) {
        let d = euclidean_distances(&random_points(n, 3, seed)).unwrap();
        let Ok(g) = geodesic_distances(&d, Neighborhood::Knn(k)) else {
            return Ok(());
        };
        for x in 0..n {
            prop_assert_eq!(g.get(x, x), 0.0);
            for y in 0..n {
                prop_assert_eq!(g.get(x, y), g.get(y, x));
                prop_assert!(g.get(x, y) >= d.get(x, y) - 1e-12);
                for z in 0..n {
                    prop_assert!(g.get(x, z) <= (g.get(x, y) + g.get(y, z)) * (1.0 + 1e-14));
                }
            }
        }
    }

    #[test]
    fn embeddings_are_centered(seed in any::<u64>(), n in 12usize..40) {
        let d = euclidean_distances(&swiss_roll(n, seed)).unwrap();
        let Ok(e) = isomap(&d, Neighborhood::Knn(8), 2) else {
            return Ok(());
        };
        for c in 0..e.dim() {
            prop_assert!(e.coordinates.column(c).mean().abs() <= 1e-9);
        }
    }
}

// 1 - r^2 is not monotone in general: past the intrinsic dimension the
// extra coordinates are noise and can lower the correlation slightly.
#[test]
fn residual_variance_falls_with_dimension_on_a_swiss_roll() {
    for seed in 0..10 {
        let d = euclidean_distances(&swiss_roll(120, seed)).unwrap();
        let e = isomap(&d, Neighborhood::Knn(10), 2).unwrap();
        let rv = &e.residual_variance;
        assert!(rv[1] < rv[0], "seed {seed}: {rv:?}");
        for w in rv[1..].windows(2) {
            assert!(w[1] <= w[0] + 5e-3, "seed {seed}: {rv:?}");
        }
        // the roll is intrinsically two-dimensional
        assert!(e.residual_variance[1] < 0.05, "seed {seed}: {:?}", e.residual_variance);
    }
}
