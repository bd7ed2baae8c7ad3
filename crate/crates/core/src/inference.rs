//! Two-sample permutation tests, PCA and a hard linear-separability check.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use thiserror::Error;

use crate::data::format_f64;
use crate::linalg::{canonical_sign, sorted_eigen};
use crate::rng;

pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 1_000_000;
pub const DEFAULT_MONTE_CARLO_SAMPLES: usize = 100_000;
pub const HISTOGRAM_BINS: usize = 20;

/// Relative slack under which a null statistic counts as a tie with the
/// observed one. Absorbs summation-order rounding between assignments that
/// are mathematically equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("each group needs at least 2 observations (got {n1} and {n2})")]
    GroupTooSmall { n1: usize, n2: usize },
    #[error("observations must be finite")]
    NonFinite,
    #[error("observed statistic {0} is not in the null distribution")]
    ObservedNotInNull(f64),
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("every class needs at least one point")]
    MissingClass,
    #[error("{points} points but {labels} labels, or ragged coordinates")]
    ShapeMismatch { points: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationConfig {
    /// Enumerate every assignment when `C(n1 + n2, n1)` is at most this.
    pub exhaustive_limit: u64,
    /// Random assignments drawn (besides the observed one) otherwise.
    pub monte_carlo_samples: usize,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            monte_carlo_samples: DEFAULT_MONTE_CARLO_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullKind {
    Exhaustive,
    /// Complementary assignments share a statistic when `n1 == n2`; only
    /// assignments keeping the first observation in group 1 are listed.
    ExhaustiveCollapsed,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTestResult {
    pub t_obs: f64,
    /// Statistics in combinatorial-rank order; the observed assignment is first.
    pub null_distribution: Vec<f64>,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub kind: NullKind,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// `|mean1 - mean2| / sqrt(var1 / n1 + var2 / n2)` with `n - 1` variances.
///
/// A zero mean difference gives 0 whatever the variances; a nonzero one over
/// zero spread gives `+inf`.
pub fn two_sample_statistic(xs1: &[f64], xs2: &[f64]) -> f64 {
    let (m1, v1) = mean_var(xs1.iter().copied(), xs1.len());
    let (m2, v2) = mean_var(xs2.iter().copied(), xs2.len());
    statistic_from_moments(m1, v1, xs1.len(), m2, v2, xs2.len())
}

fn statistic_from_moments(m1: f64, v1: f64, n1: usize, m2: f64, v2: f64, n2: usize) -> f64 {
    let diff = (m1 - m2).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / (v1 / n1 as f64 + v2 / n2 as f64).sqrt()
}

/// Statistic for the split where `in_first[i]` sends `pooled[i]` to group 1.
fn split_statistic(pooled: &[f64], in_first: &[bool], n1: usize) -> f64 {
    let n2 = pooled.len() - n1;
    let g1 = pooled.iter().zip(in_first).filter(|(_, &f)| f).map(|(&x, _)| x);
    let g2 = pooled.iter().zip(in_first).filter(|(_, &f)| !f).map(|(&x, _)| x);
    let (m1, v1) = mean_var(g1, n1);
    let (m2, v2) = mean_var(g2, n2);
    statistic_from_moments(m1, v1, n1, m2, v2, n2)
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = match r.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    r
}

/// Advances `c` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `#{t in null : t >= t_obs} / |null|`, with ties within [`TIE_TOLERANCE`].
pub fn pvalue_from_null(null: &[f64], t_obs: f64) -> Result<f64, InferenceError> {
    let slack = if t_obs.is_finite() { TIE_TOLERANCE * t_obs.abs() } else { 0.0 };
    let is_tie = |t: f64| t == t_obs || (t - t_obs).abs() <= slack;
    if !null.iter().any(|&t| is_tie(t)) {
        return Err(InferenceError::ObservedNotInNull(t_obs));
    }
    let extreme = null.iter().filter(|&&t| t >= t_obs || is_tie(t)).count();
    Ok(extreme as f64 / null.len() as f64)
}

/// Two-sample permutation test of equal means.
///
/// All `C(n1 + n2, n1)` assignments are enumerated when that count is within
/// `config.exhaustive_limit` (halved by complement symmetry when
/// `n1 == n2`); otherwise `config.monte_carlo_samples` random assignments are
/// drawn and the observed one is added.
pub fn permutation_test(
    xs1: &[f64],
    xs2: &[f64],
    config: &PermutationConfig,
) -> Result<PermutationTestResult, InferenceError> {
    let (n1, n2) = (xs1.len(), xs2.len());
    if n1 < 2 || n2 < 2 {
        return Err(InferenceError::GroupTooSmall { n1, n2 });
    }
    if xs1.iter().chain(xs2).any(|x| !x.is_finite()) {
        return Err(InferenceError::NonFinite);
    }
    let pooled: Vec<f64> = xs1.iter().chain(xs2).copied().collect();
    let n = pooled.len();
    let total = binomial(n as u64, n1 as u64);
    let exhaustive = total <= config.exhaustive_limit as u128;
    let collapsed = exhaustive && n1 == n2;
    let kind = match (exhaustive, collapsed) {
        (true, true) => NullKind::ExhaustiveCollapsed,
        (true, false) => NullKind::Exhaustive,
        _ => NullKind::MonteCarlo,
    };

    // Every value equal: no assignment can differ from another.
    if pooled.iter().all(|&x| x == pooled[0]) {
        let m = match kind {
            NullKind::Exhaustive => total as usize,
            NullKind::ExhaustiveCollapsed => (total / 2) as usize,
            NullKind::MonteCarlo => config.monte_carlo_samples + 1,
        };
        return Ok(PermutationTestResult {
            t_obs: 0.0,
            null_distribution: vec![0.0; m],
            p_value: 1.0,
            n1,
            n2,
            m,
            kind,
        });
    }

    let mut in_first = vec![false; n];
    let mut null = Vec::new();
    if exhaustive {
        let mut combo: Vec<usize> = (0..n1).collect();
        loop {
            if collapsed && combo[0] != 0 {
                break;
            }
            in_first.iter_mut().for_each(|f| *f = false);
            for &i in &combo {
                in_first[i] = true;
            }
            null.push(split_statistic(&pooled, &in_first, n1));
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    } else {
        let mut rng = rng::stream(config.seed, 0);
        in_first[..n1].iter_mut().for_each(|f| *f = true);
        null.push(split_statistic(&pooled, &in_first, n1));
        for _ in 0..config.monte_carlo_samples {
            in_first.iter_mut().for_each(|f| *f = false);
            for i in sample_indices(&mut rng, n, n1) {
                in_first[i] = true;
            }
            null.push(split_statistic(&pooled, &in_first, n1));
        }
    }
    let t_obs = null[0];
    let p_value = pvalue_from_null(&null, t_obs)?;
    Ok(PermutationTestResult {
        t_obs,
        m: null.len(),
        null_distribution: null,
        p_value,
        n1,
        n2,
        kind,
    })
}

/// Equal-width histogram over the finite range of `values`; infinite values
/// land in the last bin. Returns `(lo, hi, count)` per bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if finite.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let bin = if !v.is_finite() || width == 0.0 {
            if v.is_finite() { 0 } else { bins - 1 }
        } else {
            (((v - lo) / width) as usize).min(bins - 1)
        };
        counts[bin] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + width * i as f64, if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 }, c))
        .collect()
}

impl PermutationTestResult {
    /// Structured text report: a key-value header, then the null histogram.
    pub fn report(&self, title: &str) -> String {
        let kind = match self.kind {
            NullKind::Exhaustive => "exhaustive",
            NullKind::ExhaustiveCollapsed => "exhaustive-collapsed",
            NullKind::MonteCarlo => "monte-carlo",
        };
        let mut out = String::new();
        let _ = writeln!(out, "[permutation_test]");
        let _ = writeln!(out, "title = {title}");
        let _ = writeln!(out, "n1 = {}", self.n1);
        let _ = writeln!(out, "n2 = {}", self.n2);
        let _ = writeln!(out, "null = {kind}");
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "t_obs = {}", format_f64(self.t_obs));
        let _ = writeln!(out, "p_value = {}", format_f64(self.p_value));
        let _ = writeln!(out, "\n[histogram]");
        let _ = writeln!(out, "lo,hi,count");
        for (lo, hi, c) in histogram(&self.null_distribution, HISTOGRAM_BINS) {
            let _ = writeln!(out, "{},{},{}", format_f64(lo), format_f64(hi), c);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Unit principal directions as columns, over the kept feature columns.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub variance_explained: Vec<f64>,
    /// Sample coordinates on every component (`samples x components`).
    pub scores: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Column standard deviations when standardized.
    pub scale: Option<DVector<f64>>,
    /// Feature columns used; constant columns are dropped when standardizing.
    pub kept_columns: Vec<usize>,
}

/// Principal components of the rows of `features`.
///
/// With more features than samples the eigenproblem is solved on the
/// `n x n` Gram matrix of the centered data and mapped back.
pub fn pca(features: &DMatrix<f64>, standardize: bool) -> Result<PcaResult, InferenceError> {
    let n = features.nrows();
    if n < 2 {
        return Err(InferenceError::TooFewSamples(n));
    }
    let denom = (n - 1) as f64;
    let mut kept_columns = Vec::new();
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..features.ncols() {
        let col = features.column(j);
        let mean = col.mean();
        let sd = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / denom).sqrt();
        if standardize && sd <= 1e-12 * mean.abs().max(1.0) {
            continue;
        }
        kept_columns.push(j);
        means.push(mean);
        scales.push(sd);
    }
    if standardize && kept_columns.len() < features.ncols() {
        log::warn!(
            "pca: dropped {} zero-variance columns",
            features.ncols() - kept_columns.len()
        );
    }
    let p = kept_columns.len();
    let x = DMatrix::from_fn(n, p, |i, j| {
        let v = features[(i, kept_columns[j])] - means[j];
        if standardize {
            v / scales[j]
        } else {
            v
        }
    });
    let total_variance: f64 = x.iter().map(|v| v * v).sum::<f64>() / denom;

    let (eigenvalues, mut components) = if p <= n {
        let cov = x.transpose() * &x / denom;
        sorted_eigen(cov)
    } else {
        let gram = &x * x.transpose() / denom;
        let (vals, u) = sorted_eigen(gram);
        let mut comps = x.transpose() * u;
        for (c, &lambda) in vals.iter().enumerate() {
            let norm = comps.column(c).norm();
            if lambda > 0.0 && norm > 0.0 {
                comps.column_mut(c).scale_mut(1.0 / norm);
            }
        }
        (vals, comps)
    };
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let rank = eigenvalues
        .iter()
        .take(p.min(n - 1))
        .take_while(|&&l| l > 1e-12 * lambda_max && l > 0.0)
        .count();
    components = components.columns(0, rank).into_owned();
    for c in 0..rank {
        let mut col: Vec<f64> = components.column(c).iter().copied().collect();
        canonical_sign(&mut col);
        components.set_column(c, &DVector::from_vec(col));
    }
    let eigenvalues: Vec<f64> = eigenvalues[..rank].to_vec();
    let variance_explained = eigenvalues
        .iter()
        .map(|l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();
    let scores = &x * &components;
    Ok(PcaResult {
        components,
        eigenvalues,
        variance_explained,
        scores,
        mean: DVector::from_vec(means),
        scale: standardize.then(|| DVector::from_vec(scales)),
        kept_columns,
    })
}

/// A separating hyperplane `normal . x + offset = 0` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
    /// Smallest signed distance of any point to the plane (positive).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Separability {
    Separable(Hyperplane),
    NotSeparable,
}

impl Separability {
    pub fn is_separable(&self) -> bool {
        matches!(self, Separability::Separable(_))
    }
}

/// Hard linear separation of the `true` points from the `false` points.
///
/// Solves the LP `min |w|_1` subject to `y_i (w . x_i + b) >= 1`. The normal
/// is then scaled to unit length and the offset moved to the middle of the
/// gap between the two classes along it.
pub fn linear_separability(points: &[Vec<f64>], labels: &[bool]) -> Result<Separability, InferenceError> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};

    if points.len() != labels.len() {
        return Err(InferenceError::ShapeMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(InferenceError::MissingClass);
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(InferenceError::ShapeMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(InferenceError::NonFinite);
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let plus: Vec<_> = (0..d).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let minus: Vec<_> = (0..d).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let bias = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
    for (x, &label) in points.iter().zip(labels) {
        let y = if label { 1.0 } else { -1.0 };
        let mut expr: Vec<(minilp::Variable, f64)> = Vec::with_capacity(2 * d + 1);
        for j in 0..d {
            expr.push((plus[j], y * x[j]));
            expr.push((minus[j], -y * x[j]));
        }
        expr.push((bias, y));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, 1.0);
    }
    let solution = match lp.solve() {
        Ok(s) => s,
        Err(minilp::Error::Infeasible) => return Ok(Separability::NotSeparable),
        Err(minilp::Error::Unbounded) => unreachable!("objective is bounded below by zero"),
    };
    let w: Vec<f64> = (0..d).map(|j| solution[plus[j]] - solution[minus[j]]).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let normal: Vec<f64> = w.iter().map(|v| v / norm).collect();
    let project = |x: &Vec<f64>| x.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>();
    let lowest_positive = points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(x, _)| project(x))
        .fold(f64::INFINITY, f64::min);
    let highest_negative = points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(x, _)| project(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let offset = -0.5 * (lowest_positive + highest_negative);
    let margin = 0.5 * (lowest_positive - highest_negative);
    if margin <= 0.0 {
        // LP round-off on a barely separable set.
        return Ok(Separability::NotSeparable);
    }
    Ok(Separability::Separable(Hyperplane {
        normal,
        offset,
        margin,
    }))
}
