#![allow(dead_code)]

use plstat_core::data::{MatrixKind, PointCloud, SquareMatrix};
use plstat_core::rng;
use rand::Rng;

/// Random symmetric distance matrix. With `levels > 0` entries are drawn
/// from `{1, ..., levels}` so ties are common.
pub fn random_distances(n: usize, seed: u64, levels: u32) -> SquareMatrix {
    let mut r = rng::stream(seed, 7);
    SquareMatrix::from_fn(n, MatrixKind::Distance, |_, _| {
        if levels > 0 {
            r.gen_range(1..=levels) as f64
        } else {
            r.gen_range(0.05..1.0)
        }
    })
    .unwrap()
}

pub fn random_points(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut r = rng::stream(seed, 8);
    PointCloud::new((0..n).map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()).unwrap()
}

/// Up to `max` intervals with endpoints on the grid `1/64`, so every sum,
/// midpoint and area stays exactly representable.
pub fn dyadic_intervals(seed: u64, max: usize) -> Vec<(f64, f64)> {
    let mut r = rng::stream(seed, 9);
    let count = r.gen_range(0..=max);
    (0..count)
        .map(|_| {
            let a = r.gen_range(0..256) as f64 / 64.0;
            let len = r.gen_range(1..128) as f64 / 64.0;
            (a, a + len)
        })
        .collect()
}

pub fn tent_value(a: f64, b: f64, t: f64) -> f64 {
    (t - a).min(b - t).max(0.0)
}

/// k-th largest tent value at `t` (1-based), zero when fewer tents.
pub fn kth_largest_tent(intervals: &[(f64, f64)], k: usize, t: f64) -> f64 {
    let mut values: Vec<f64> = intervals.iter().map(|&(a, b)| tent_value(a, b, t)).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values.get(k - 1).copied().unwrap_or(0.0)
}

/// Every point where a landscape level can bend: endpoints, peaks, and
/// crossings of one tent's rising side with another's falling side.
pub fn candidate_breakpoints(intervals: &[(f64, f64)]) -> Vec<f64> {
    let mut ts = Vec::new();
    for &(a, b) in intervals {
        ts.extend([a, b]);
        ts.extend(intervals.iter().map(|&(_, d)| 0.5 * (a + d)));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}
