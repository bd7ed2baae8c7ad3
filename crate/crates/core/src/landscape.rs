//! Exact persistence landscapes.
//!
//! Every level `lambda_k` is stored by its breakpoints, so integrals, inner
//! products and all `L^p` distances are computed in closed form. The
//! levels are extracted from the sorted tents by the sweep of Bubenik and
//! Dlotko: each pass walks the upper envelope of the remaining tents, and the
//! pieces it passes under (including the part of a tent cut off at a
//! crossing) are handed to the next pass.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::format_f64;
use crate::persistence::Barcode;


#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("interval ({birth}, {death}) has birth after death")]
    Unordered { birth: f64, death: f64 },
    #[error("interval endpoints must be finite")]
    NonFinite,
    #[error("infinite cap {cap} is below the largest finite endpoint {needed}")]
    CapTooSmall { cap: f64, needed: f64 },
    #[error("cannot average an empty list of landscapes")]
    EmptyList,
    #[error("landscapes of degree {0} and {1} cannot be combined")]
    DegreeMismatch(usize, usize),
    #[error("invalid norm exponent {0}")]
    BadP(f64),
    #[error("invalid grid: [{t_min}, {t_max}] with {n_grid} points")]
    BadGrid { t_min: f64, t_max: f64, n_grid: usize },
    #[error("malformed landscape: {0}")]
    Malformed(String),
}

/// A continuous, compactly supported, piecewise-linear function.
///
/// Breakpoints have strictly increasing `t`; the function is zero outside
/// `[first t, last t]` and linear in between breakpoints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Checks ordering, non-negativity and zero values at both ends.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self, LandscapeError> {
        if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(LandscapeError::NonFinite);
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(LandscapeError::Malformed("breakpoints not increasing".into()));
        }
        if points.iter().any(|p| p.1 < 0.0) {
            return Err(LandscapeError::Malformed("negative value".into()));
        }
        if let (Some(first), Some(last)) = (points.first(), points.last()) {
            if first.1 != 0.0 || last.1 != 0.0 {
                return Err(LandscapeError::Malformed("nonzero at the support boundary".into()));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_zero(&self) -> bool {
        self.points.iter().all(|p| p.1 == 0.0)
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.0, self.points.last()?.0))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|p| p.0 <= t);
        if idx == 0 {
            return 0.0;
        }
        if idx == pts.len() {
            return if pts[idx - 1].0 == t { pts[idx - 1].1 } else { 0.0 };
        }
        let (t0, y0) = pts[idx - 1];
        let (t1, y1) = pts[idx];
        if t == t0 {
            return y0;
        }
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    pub fn integral(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    }

    fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
    }

    /// Largest absolute slope over all segments.
    pub fn max_abs_slope(&self) -> f64 {
        self.slopes().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// `f_(a,b)(t) = max(min(t - a, b - t), 0)`.
pub fn tent(a: f64, b: f64) -> Result<PiecewiseLinear, LandscapeError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(LandscapeError::NonFinite);
    }
    if a > b {
        return Err(LandscapeError::Unordered { birth: a, death: b });
    }
    if a == b {
        return Ok(PiecewiseLinear::zero());
    }
    Ok(PiecewiseLinear {
        points: vec![(a, 0.0), (0.5 * (a + b), 0.5 * (b - a)), (b, 0.0)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceLandscape {
    pub degree: usize,
    pub levels: Vec<PiecewiseLinear>,
}

impl PersistenceLandscape {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            levels: Vec::new(),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("landscape serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LandscapeError> {
        let raw: Self = serde_json::from_str(text).map_err(|e| LandscapeError::Malformed(e.to_string()))?;
        let levels = raw
            .levels
            .into_iter()
            .map(|l| PiecewiseLinear::from_points(l.points))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            degree: raw.degree,
            levels,
        })
    }
}

/// Landscape of the intervals of `degree` in `barcode`; infinite deaths are
/// replaced by `infinite_cap`.
pub fn build_landscape(
    barcode: &Barcode,
    degree: usize,
    infinite_cap: f64,
) -> Result<PersistenceLandscape, LandscapeError> {
    let intervals: Vec<(f64, f64)> = barcode.in_degree(degree).map(|i| (i.birth, i.death)).collect();
    let has_infinite = intervals.iter().any(|i| i.1.is_infinite());
    let capped = if has_infinite {
        if !infinite_cap.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        let needed = intervals
            .iter()
            .map(|&(b, d)| if d.is_finite() { d } else { b })
            .fold(f64::NEG_INFINITY, f64::max);
        if infinite_cap < needed {
            return Err(LandscapeError::CapTooSmall {
                cap: infinite_cap,
                needed,
            });
        }
        intervals
            .into_iter()
            .map(|(b, d)| (b, if d.is_finite() { d } else { infinite_cap }))
            .collect()
    } else {
        intervals
    };
    landscape_from_intervals(degree, &capped)
}

/// Landscape of a list of finite `(birth, death)` pairs.
pub fn landscape_from_intervals(
    degree: usize,
    intervals: &[(f64, f64)],
) -> Result<PersistenceLandscape, LandscapeError> {
    let mut current = Vec::with_capacity(intervals.len());
    for &(b, d) in intervals {
        if !b.is_finite() || !d.is_finite() {
            return Err(LandscapeError::NonFinite);
        }
        if b > d {
            return Err(LandscapeError::Unordered { birth: b, death: d });
        }
        if b < d {
            current.push((b, d));
        }
    }
    // birth ascending, death descending
    current.sort_by(|x: &(f64, f64), y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)));

    let mut levels = Vec::new();
    while !current.is_empty() {
        let (mut cb, mut cd) = current[0];
        let mut level = vec![(cb, 0.0), (0.5 * (cb + cd), 0.5 * (cd - cb))];
        let mut next = Vec::with_capacity(current.len());
        let mut i = 1;
        while i < current.len() {
            let (b, d) = current[i];
            let mut step = 1;
            if d > cd {
                if b < cd {
                    level.push((0.5 * (b + cd), 0.5 * (cd - b)));
                    // The part of (b, d) below the crossing continues as the
                    // tent (b, cd) on the next level; keep `next` sorted.
                    while i + step < current.len() && current[i + step].0 == b && current[i + step].1 >= cd {
                        next.push(current[i + step]);
                        step += 1;
                    }
                    next.push((b, cd));
                    while i + step < current.len() && current[i + step].1 <= cd {
                        next.push(current[i + step]);
                        step += 1;
                    }
                } else {
                    level.push((cd, 0.0));
                    level.push((b, 0.0));
                }
                level.push((0.5 * (b + d), 0.5 * (d - b)));
                cb = b;
                cd = d;
            } else {
                next.push((b, d));
            }
            i += step;
        }
        level.push((cd, 0.0));
        debug_assert!(cb <= cd);
        level.dedup_by(|later, earlier| later.0 == earlier.0 && later.1 == earlier.1);
        levels.push(PiecewiseLinear { points: level });
        current = next;
    }
    Ok(PersistenceLandscape { degree, levels })
}

/// `lambda_k(t)` with `k` starting at 1; zero beyond the stored levels.
pub fn evaluate(l: &PersistenceLandscape, k: usize, t: f64) -> f64 {
    match k.checked_sub(1).and_then(|i| l.levels.get(i)) {
        Some(level) => level.eval(t),
        None => 0.0,
    }
}

fn merged_breakpoints<'a>(fs: impl IntoIterator<Item = &'a PiecewiseLinear>) -> Vec<f64> {
    let mut ts: Vec<f64> = fs.into_iter().flat_map(|f| f.points.iter().map(|p| p.0)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

fn check_degrees(a: &PersistenceLandscape, b: &PersistenceLandscape) -> Result<(), LandscapeError> {
    if a.degree == b.degree {
        Ok(())
    } else {
        Err(LandscapeError::DegreeMismatch(a.degree, b.degree))
    }
}

/// Pointwise mean, exact on the union of breakpoints.
pub fn mean_landscape(ls: &[PersistenceLandscape]) -> Result<PersistenceLandscape, LandscapeError> {
    let first = ls.first().ok_or(LandscapeError::EmptyList)?;
    for l in ls {
        check_degrees(first, l)?;
    }
    let depth = ls.iter().map(|l| l.levels.len()).max().unwrap_or(0);
    let weight = 1.0 / ls.len() as f64;
    let zero = PiecewiseLinear::zero();
    let levels = (0..depth)
        .map(|k| {
            let fs: Vec<&PiecewiseLinear> = ls.iter().map(|l| l.levels.get(k).unwrap_or(&zero)).collect();
            let points = merged_breakpoints(fs.iter().copied())
                .into_iter()
                .map(|t| (t, fs.iter().map(|f| f.eval(t)).sum::<f64>() * weight))
                .collect();
            PiecewiseLinear { points }
        })
        .collect();
    Ok(PersistenceLandscape {
        degree: first.degree,
        levels,
    })
}

/// Calls `seg(dt, f0, f1, g0, g1)` on every segment of the common refinement.
fn for_each_segment(f: &PiecewiseLinear, g: &PiecewiseLinear, mut seg: impl FnMut(f64, f64, f64, f64, f64)) {
    let ts = merged_breakpoints([f, g]);
    let vals: Vec<(f64, f64)> = ts.iter().map(|&t| (f.eval(t), g.eval(t))).collect();
    for i in 1..ts.len() {
        seg(ts[i] - ts[i - 1], vals[i - 1].0, vals[i].0, vals[i - 1].1, vals[i].1);
    }
}

fn level_pairs<'a>(
    a: &'a PersistenceLandscape,
    b: &'a PersistenceLandscape,
) -> impl Iterator<Item = (&'a PiecewiseLinear, &'a PiecewiseLinear)> {
    static ZERO: PiecewiseLinear = PiecewiseLinear { points: Vec::new() };
    let depth = a.levels.len().max(b.levels.len());
    (0..depth).map(move |k| (a.levels.get(k).unwrap_or(&ZERO), b.levels.get(k).unwrap_or(&ZERO)))
}

/// The exponent of a landscape distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    P(f64),
    Infinity,
}

impl Norm {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Some(Norm::Infinity),
            t => t.parse().ok().map(Norm::P),
        }
    }
}

/// `(sum_k int |lambda_k - lambda'_k|^p dt)^(1/p)`, or the sup norm.
pub fn landscape_distance(
    a: &PersistenceLandscape,
    b: &PersistenceLandscape,
    norm: Norm,
) -> Result<f64, LandscapeError> {
    check_degrees(a, b)?;
    match norm {
        Norm::Infinity => {
            let mut sup = 0.0f64;
            for (f, g) in level_pairs(a, b) {
                for t in merged_breakpoints([f, g]) {
                    sup = sup.max((f.eval(t) - g.eval(t)).abs());
                }
            }
            Ok(sup)
        }
        Norm::P(p) if p.is_nan() || p < 1.0 => Err(LandscapeError::BadP(p)),
        Norm::P(p) if p.is_infinite() => landscape_distance(a, b, Norm::Infinity),
        Norm::P(p) => {
            let mut total = 0.0;
            for (f, g) in level_pairs(a, b) {
                for_each_segment(f, g, |dt, f0, f1, g0, g1| {
                    total += segment_abs_power(dt, f0 - g0, f1 - g1, p);
                });
            }
            Ok(total.powf(1.0 / p))
        }
    }
}

/// `int_0^dt |h(s)|^p ds` for `h` linear from `h0` to `h1`.
fn segment_abs_power(dt: f64, h0: f64, h1: f64, p: f64) -> f64 {
    if h0 == 0.0 && h1 == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        if h0 * h1 >= 0.0 {
            return 0.5 * dt * (h0.abs() + h1.abs());
        }
        return 0.5 * dt * (h0 * h0 + h1 * h1) / (h0.abs() + h1.abs());
    }
    if p == 2.0 {
        return dt * (h0 * h0 + h0 * h1 + h1 * h1) / 3.0;
    }
    if h0 * h1 < 0.0 {
        let root = dt * h0 / (h0 - h1);
        return segment_abs_power(root, h0, 0.0, p) + segment_abs_power(dt - root, 0.0, h1, p);
    }
    // |h| is linear from x0 to x1, so the integral is
    // dt (x1^(p+1) - x0^(p+1)) / ((p+1)(x1 - x0)).
    let (x0, x1) = (h0.abs(), h1.abs());
    let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    if hi - lo > 1e-3 * hi {
        return dt * (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / ((p + 1.0) * (hi - lo));
    }
    // Nearly constant: the difference above cancels, but a 5-point Gauss
    // rule on a smooth, almost flat integrand is accurate to rounding.
    let (mid, half) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    0.5 * dt
        * GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(z, w)| w * (mid + half * z).powf(p))
            .sum::<f64>()
}

const GAUSS_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

/// `<lambda, lambda'> = sum_k int lambda_k lambda'_k dt`.
pub fn landscape_kernel(a: &PersistenceLandscape, b: &PersistenceLandscape) -> Result<f64, LandscapeError> {
    check_degrees(a, b)?;
    let mut total = 0.0;
    for (f, g) in level_pairs(a, b) {
        for_each_segment(f, g, |dt, f0, f1, g0, g1| {
            total += dt * (2.0 * f0 * g0 + f0 * g1 + f1 * g0 + 2.0 * f1 * g1) / 6.0;
        });
    }
    Ok(total)
}

/// Total area under all levels.
pub fn landscape_integral(l: &PersistenceLandscape) -> f64 {
    l.levels.iter().map(PiecewiseLinear::integral).sum()
}

/// Uniform grid of `n_grid` points including both endpoints.
pub fn grid(t_min: f64, t_max: f64, n_grid: usize) -> Result<Vec<f64>, LandscapeError> {
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) || n_grid < 2 {
        return Err(LandscapeError::BadGrid { t_min, t_max, n_grid });
    }
    let step = (t_max - t_min) / (n_grid - 1) as f64;
    Ok((0..n_grid)
        .map(|j| if j == n_grid - 1 { t_max } else { t_min + step * j as f64 })
        .collect())
}

/// `n_levels x n_grid` matrix of `lambda_i(t_j)` on the uniform grid.
pub fn discretize(
    l: &PersistenceLandscape,
    t_min: f64,
    t_max: f64,
    n_grid: usize,
    n_levels: usize,
) -> Result<DMatrix<f64>, LandscapeError> {
    let ts = grid(t_min, t_max, n_grid)?;
    Ok(DMatrix::from_fn(n_levels, n_grid, |i, j| evaluate(l, i + 1, ts[j])))
}

/// Grid CSV: a header row of `t` values, then one row per level.
pub fn discretized_to_csv(ts: &[f64], values: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = ts.iter().map(|&t| format_f64(t)).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for row in values.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
