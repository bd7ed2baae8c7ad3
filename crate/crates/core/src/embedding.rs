//! Isomap: neighborhood graph, graph geodesics, classical MDS.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::data::{format_f64, MatrixKind, SquareMatrix};
use crate::linalg::{canonical_sign, sorted_eigen};

/// Neighborhood size suggested for small matrices such as pairwise
/// landscape distances between a handful of samples.
pub const DEFAULT_K_SMALL: usize = 7;
/// Neighborhood size suggested for residue-scale matrices.
pub const DEFAULT_K_LARGE: usize = 12;
/// Largest number of dimensions reported in the scree data.
pub const SCREE_DIMS: usize = 10;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("neighborhood graph has {components} connected components")]
    DisconnectedGraph { components: usize },
    #[error("centered geodesic matrix has no positive eigenvalues")]
    NoPositiveEigenvalues,
    #[error("expected a distance matrix")]
    NotDistance,
    #[error("invalid neighborhood or target dimension")]
    BadParameter,
    #[error("matrix has {matrix} points, embedding has {embedding}")]
    SizeMismatch { matrix: usize, embedding: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighborhood {
    /// Each point joined to its `k` nearest points (union, so symmetric).
    Knn(usize),
    /// Points joined when their distance is at most epsilon.
    Epsilon(f64),
}

#[derive(Debug, Clone)]
pub struct Embedding {
    /// `n x d` coordinates, columns centered.
    pub coordinates: DMatrix<f64>,
    /// `1 - r^2` between geodesic and embedded distances, for `1..=len` dims.
    pub residual_variance: Vec<f64>,
    /// Leading eigenvalues of the double-centered squared geodesic matrix.
    pub eigenvalues: Vec<f64>,
    pub neighborhood: Neighborhood,
    pub geodesic: SquareMatrix,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coordinates.ncols()
    }

    pub fn coordinates_csv(&self) -> String {
        let mut out = String::new();
        for row in self.coordinates.row_iter() {
            let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn scree_csv(&self) -> String {
        let mut out = String::from("dim,residual_variance\n");
        for (d, r) in self.residual_variance.iter().enumerate() {
            let _ = writeln!(out, "{},{}", d + 1, format_f64(*r));
        }
        out
    }

    pub fn metadata(&self) -> String {
        let mut out = String::from("[isomap]\n");
        match self.neighborhood {
            Neighborhood::Knn(k) => {
                let _ = writeln!(out, "k = {k}");
            }
            Neighborhood::Epsilon(e) => {
                let _ = writeln!(out, "epsilon = {}", format_f64(e));
            }
        }
        let _ = writeln!(out, "n = {}", self.coordinates.nrows());
        let _ = writeln!(out, "dim = {}", self.dim());
        let ev: Vec<String> = self.eigenvalues.iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(out, "eigenvalues = {}", ev.join(","));
        out
    }
}

/// Adjacency lists `(neighbor, weight)` of the neighborhood graph.
pub fn neighborhood_graph(d: &SquareMatrix, rule: Neighborhood) -> Vec<Vec<(usize, f64)>> {
    let n = d.n();
    let mut adjacent = vec![vec![false; n]; n];
    match rule {
        Neighborhood::Knn(k) => {
            for i in 0..n {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
                for &j in others.iter().take(k) {
                    adjacent[i][j] = true;
                    adjacent[j][i] = true;
                }
            }
        }
        Neighborhood::Epsilon(eps) => {
            for i in 0..n {
                for j in 0..n {
                    if i != j && d.get(i, j) <= eps {
                        adjacent[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| adjacent[i][j]).map(|j| (j, d.get(i, j))).collect())
        .collect()
}

fn component_count(graph: &[Vec<(usize, f64)>]) -> usize {
    let n = graph.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(w, _) in &graph[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// Shortest-path lengths from `source` (Dijkstra).
pub fn dijkstra(graph: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((ordered(0.0), source)));
    while let Some(Reverse((du, u))) = heap.pop() {
        let du = f64::from_bits(du);
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &graph[u] {
            let alt = du + w;
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(Reverse((ordered(alt), v)));
            }
        }
    }
    dist
}

// Non-negative floats order like their bit patterns.
fn ordered(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    x.to_bits()
}

/// All-pairs geodesic distances on the neighborhood graph.
pub fn geodesic_distances(d: &SquareMatrix, rule: Neighborhood) -> Result<SquareMatrix, EmbeddingError> {
    if d.kind() != MatrixKind::Distance {
        return Err(EmbeddingError::NotDistance);
    }
    let graph = neighborhood_graph(d, rule);
    let components = component_count(&graph);
    if components > 1 {
        return Err(EmbeddingError::DisconnectedGraph { components });
    }
    let n = d.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|s| dijkstra(&graph, s)).collect();
    // Symmetrize exactly; the two directions can differ in the last bit.
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = if i == j { 0.0 } else { rows[i][j].min(rows[j][i]) };
        }
    }
    SquareMatrix::new(n, entries, MatrixKind::Distance).map_err(|_| EmbeddingError::NotDistance)
}

/// Classical MDS of `g`: top eigenvectors of `-1/2 J G^2 J` scaled by the
/// square roots of their eigenvalues. Returns coordinates and all positive
/// eigenvalues.
pub fn classical_mds(g: &SquareMatrix, target_dim: usize) -> Result<(DMatrix<f64>, Vec<f64>), EmbeddingError> {
    let n = g.n();
    let sq = DMatrix::from_fn(n, n, |i, j| g.get(i, j) * g.get(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let (values, vectors) = sorted_eigen(b);
    let lambda_max = values.first().copied().unwrap_or(0.0);
    if !(lambda_max > 0.0) {
        return Err(EmbeddingError::NoPositiveEigenvalues);
    }
    let positive: Vec<f64> = values
        .iter()
        .copied()
        .take_while(|&l| l > 1e-12 * lambda_max)
        .collect();
    let dim = target_dim.min(positive.len());
    let mut coords = DMatrix::zeros(n, dim);
    for c in 0..dim {
        let mut v: Vec<f64> = vectors.column(c).iter().copied().collect();
        canonical_sign(&mut v);
        let scale = positive[c].sqrt();
        for i in 0..n {
            coords[(i, c)] = v[i] * scale;
        }
    }
    Ok((coords, positive))
}

fn pairwise(coords: &DMatrix<f64>, dims: usize) -> impl Fn(usize, usize) -> f64 + '_ {
    move |i, j| {
        (0..dims)
            .map(|c| (coords[(i, c)] - coords[(j, c)]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn residual_variance(g: &SquareMatrix, coords: &DMatrix<f64>, dims: usize) -> f64 {
    let n = g.n();
    let dist = pairwise(coords, dims);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            xs.push(g.get(i, j));
            ys.push(dist(i, j));
        }
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return if sxx == syy { 0.0 } else { 1.0 };
    }
    1.0 - sxy * sxy / (sxx * syy)
}

pub fn isomap(d: &SquareMatrix, rule: Neighborhood, target_dim: usize) -> Result<Embedding, EmbeddingError> {
    match rule {
        Neighborhood::Knn(0) => return Err(EmbeddingError::BadParameter),
        Neighborhood::Epsilon(e) if !(e >= 0.0) => return Err(EmbeddingError::BadParameter),
        _ => {}
    }
    if target_dim == 0 {
        return Err(EmbeddingError::BadParameter);
    }
    let geodesic = geodesic_distances(d, rule)?;
    let scree_dims = target_dim.max(SCREE_DIMS).min(d.n().saturating_sub(1));
    let (all, eigenvalues) = classical_mds(&geodesic, scree_dims.max(1))?;
    let residual = (1..=all.ncols()).map(|k| residual_variance(&geodesic, &all, k)).collect();
    let dim = target_dim.min(all.ncols());
    Ok(Embedding {
        coordinates: all.columns(0, dim).into_owned(),
        residual_variance: residual,
        eigenvalues,
        neighborhood: rule,
        geodesic,
    })
}

/// `(max |D_ij - |e_i - e_j||, mean (D_ij - |e_i - e_j|)^2)` over `i < j`.
pub fn embedding_error(d: &SquareMatrix, e: &Embedding) -> Result<(f64, f64), EmbeddingError> {
    let n = d.n();
    if e.coordinates.nrows() != n {
        return Err(EmbeddingError::SizeMismatch {
            matrix: n,
            embedding: e.coordinates.nrows(),
        });
    }
    let dist = pairwise(&e.coordinates, e.dim());
    let (mut max_abs, mut sum_sq, mut count) = (0.0f64, 0.0, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = d.get(i, j) - dist(i, j);
            max_abs = max_abs.max(diff.abs());
            sum_sq += diff * diff;
            count += 1;
        }
    }
    Ok((max_abs, if count == 0 { 0.0 } else { sum_sq / count as f64 }))
}
