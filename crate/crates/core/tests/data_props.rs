mod common;

use common::{random_distances, random_points};
use plstat_core::data::{
    euclidean_distances, matrix_to_csv, parse_matrix_csv, parse_point_cloud_csv, point_cloud_to_csv, MatrixKind,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euclidean_distances_satisfy_triangle_inequality(seed in any::<u64>(), n in 2usize..25, dim in 1usize..6) {
        let d = euclidean_distances(&random_points(n, dim, seed)).unwrap();
        for x in 0..n {
            prop_assert_eq!(d.get(x, x), 0.0);
            for y in 0..n {
                prop_assert_eq!(d.get(x, y), d.get(y, x));
                for z in 0..n {
                    prop_assert!(d.get(x, z) <= d.get(x, y) + d.get(y, z) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn matrices_round_trip_through_csv_bit_for_bit(seed in any::<u64>(), n in 1usize..15) {
        let d = random_distances(n, seed, 0);
        let back = parse_matrix_csv(matrix_to_csv(&d).as_bytes(), MatrixKind::Distance).unwrap();
        let bits = |m: &plstat_core::SquareMatrix| m.entries().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&d));
    }

    #[test]
    fn point_clouds_round_trip_through_csv(seed in any::<u64>(), n in 1usize..15, dim in 1usize..4) {
        let pc = random_points(n, dim, seed);
        let back = parse_point_cloud_csv(point_cloud_to_csv(&pc).as_bytes()).unwrap();
        prop_assert_eq!(back.points(), pc.points());
    }
}
