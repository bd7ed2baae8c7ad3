//! Vietoris-Rips filtrations.
//!
//! A simplex enters at the largest pairwise distance among its vertices.
//! Simplices are ordered by `(value, dim, vertices)`, which puts every face
//! before its cofaces.

use std::cmp::Ordering;
use rustc_hash::FxHashMap;
use std::fmt::Write as _;
use std::io::Read;

use smallvec::SmallVec;
use thiserror::Error;

use crate::data::{format_f64, parse_f64, MatrixKind, SquareMatrix};

pub const DEFAULT_CAPACITY: usize = 50_000_000;
pub const DEFAULT_MAX_DIM: usize = 2;
pub const DEFAULT_THRESHOLD: f64 = 1.0;

pub type Vertices = SmallVec<[u32; 4]>;

#[derive(Debug, Error)]
pub enum RipsError {
    #[error("filtration would exceed {cap} simplices")]
    CapacityExceeded { cap: usize },
    #[error("expected a distance matrix")]
    NotDistance,
    #[error("invalid threshold {0}")]
    BadThreshold(f64),
    #[error("malformed filtration at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vertices,
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Codimension-one faces, in the order obtained by dropping vertex 0, 1, ...
    pub fn faces(&self) -> impl Iterator<Item = Vertices> + '_ {
        let n = if self.vertices.len() > 1 { self.vertices.len() } else { 0 };
        (0..n).map(move |skip| {
            self.vertices
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, &v)| v)
                .collect()
        })
    }
}

fn filtration_order(a: &Simplex, b: &Simplex) -> Ordering {
    a.value
        .total_cmp(&b.value)
        .then(a.vertices.len().cmp(&b.vertices.len()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipsConfig {
    pub max_dim: usize,
    pub threshold: f64,
    pub capacity: usize,
}

impl Default for RipsConfig {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            threshold: DEFAULT_THRESHOLD,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

/// Simplices in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    simplices: Vec<Simplex>,
    max_dim: usize,
    threshold: f64,
}

impl Filtration {
    /// Sorts `simplices` into filtration order and checks that the result is
    /// a face-closed complex whose values dominate those of their faces.
    pub fn from_simplices(
        mut simplices: Vec<Simplex>,
        max_dim: usize,
        threshold: f64,
    ) -> Result<Self, RipsError> {
        let malformed = |reason: String| RipsError::Malformed { line: 0, reason };
        for s in &simplices {
            if s.vertices.is_empty() || s.vertices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(malformed(format!("bad vertex list {:?}", s.vertices)));
            }
            if s.dim() > max_dim || !s.value.is_finite() {
                return Err(malformed(format!("simplex {:?} out of range", s.vertices)));
            }
        }
        simplices.sort_by(filtration_order);
        let f = Self {
            simplices,
            max_dim,
            threshold,
        };
        let index = f.index();
        for s in &f.simplices {
            for face in s.faces() {
                match index.get(&simplex_key(&face)) {
                    Some(&i) if f.simplices[i].value <= s.value => {}
                    _ => return Err(malformed(format!("face {face:?} of {:?} missing", s.vertices))),
                }
            }
        }
        Ok(f)
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn n_vertices(&self) -> usize {
        self.simplices.iter().filter(|s| s.vertices.len() == 1).count()
    }

    /// Map from [`simplex_key`] to position in the filtration.
    pub fn index(&self) -> FxHashMap<SimplexKey, usize> {
        self.simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (simplex_key(&s.vertices), i))
            .collect()
    }

    /// Boundary of every simplex as ascending filtration positions.
    pub fn boundaries(&self) -> Vec<Vec<usize>> {
        let index = self.index();
        self.simplices
            .iter()
            .map(|s| {
                let mut col: Vec<usize> = s.faces().map(|f| index[&simplex_key(&f)]).collect();
                col.sort_unstable();
                col
            })
            .collect()
    }

    /// Simplices present at filtration value `value`.
    pub fn prefix_at(&self, value: f64) -> &[Simplex] {
        let end = self.simplices.partition_point(|s| s.value <= value);
        &self.simplices[..end]
    }

    /// Distinct filtration values in increasing order.
    pub fn critical_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self.simplices.iter().map(|s| s.value).collect();
        vals.dedup();
        vals
    }

    /// CSV dump: a `#` header line, then `value,dim,v0,v1,...` per simplex.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# filtration max_dim={} threshold={}\n",
            self.max_dim,
            format_f64(self.threshold)
        );
        for s in &self.simplices {
            let _ = write!(out, "{},{}", format_f64(s.value), s.dim());
            for v in &s.vertices {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self, RipsError> {
        let mut text = String::new();
        reader.read_to_string(&mut text).map_err(|e| RipsError::Malformed {
            line: 0,
            reason: e.to_string(),
        })?;
        let mut max_dim = None;
        let mut threshold = None;
        let mut simplices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            let bad = |reason: &str| RipsError::Malformed {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for token in header.split_whitespace() {
                    if let Some(v) = token.strip_prefix("max_dim=") {
                        max_dim = Some(v.parse().map_err(|_| bad("bad max_dim"))?);
                    } else if let Some(v) = token.strip_prefix("threshold=") {
                        threshold = Some(parse_f64(v).ok_or_else(|| bad("bad threshold"))?);
                    }
                }
                continue;
            }
            let mut cells = line.split(',');
            let value = cells
                .next()
                .and_then(parse_f64)
                .ok_or_else(|| bad("bad value"))?;
            let dim: usize = cells
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| bad("bad dimension"))?;
            let vertices = cells
                .map(|c| c.trim().parse::<u32>())
                .collect::<Result<Vertices, _>>()
                .map_err(|_| bad("bad vertex"))?;
            if vertices.len() != dim + 1 {
                return Err(bad("vertex count does not match dimension"));
            }
            simplices.push(Simplex { vertices, value });
        }
        let max_dim = max_dim.unwrap_or_else(|| simplices.iter().map(Simplex::dim).max().unwrap_or(0));
        let threshold = threshold
            .unwrap_or_else(|| simplices.iter().map(|s| s.value).fold(0.0, f64::max));
        Self::from_simplices(simplices, max_dim, threshold)
    }
}

pub type SimplexKey = u128;

/// Combinatorial-number-system key `sum_i C(v_i, i + 1) + dim offset`.
/// Unique across all simplices of dimension at most 7.
pub fn simplex_key(vertices: &[u32]) -> SimplexKey {
    let mut key: u128 = 0;
    for (i, &v) in vertices.iter().enumerate() {
        key += binomial(v as u128, i as u128 + 1);
    }
    (key << 3) | (vertices.len() as u128 - 1)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    // u128 division is slow; stay in u64 while the products fit.
    if let Some(r) = binomial_u64(n as u64, k as u64) {
        return r as u128;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn binomial_u64(n: u64, k: u64) -> Option<u64> {
    let mut r: u64 = 1;
    for i in 0..k {
        r = r.checked_mul(n - i)? / (i + 1);
    }
    Some(r)
}

/// Builds the Rips filtration of `d` with simplices up to `config.max_dim`
/// whose value does not exceed `config.threshold`.
pub fn build_rips(d: &SquareMatrix, config: &RipsConfig) -> Result<Filtration, RipsError> {
    if d.kind() != MatrixKind::Distance {
        return Err(RipsError::NotDistance);
    }
    if !(config.threshold >= 0.0) {
        return Err(RipsError::BadThreshold(config.threshold));
    }
    let n = d.n();
    let threshold = config.threshold;
    let upper: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| d.get(i, j) <= threshold)
                .map(|j| j as u32)
                .collect()
        })
        .collect();

    let mut builder = CliqueExpansion {
        d,
        threshold,
        max_dim: config.max_dim,
        capacity: config.capacity,
        out: Vec::new(),
    };
    for v in 0..n as u32 {
        let mut clique = Vertices::new();
        clique.push(v);
        builder.expand(&mut clique, 0.0, &upper[v as usize])?;
    }
    let mut simplices = builder.out;
    simplices.sort_by(filtration_order);
    Ok(Filtration {
        simplices,
        max_dim: config.max_dim,
        threshold,
    })
}

struct CliqueExpansion<'a> {
    d: &'a SquareMatrix,
    threshold: f64,
    max_dim: usize,
    capacity: usize,
    out: Vec<Simplex>,
}

impl CliqueExpansion<'_> {
    /// `candidates` are the vertices above the last clique vertex adjacent to
    /// every clique vertex.
    fn expand(&mut self, clique: &mut Vertices, value: f64, candidates: &[u32]) -> Result<(), RipsError> {
        if self.out.len() >= self.capacity {
            return Err(RipsError::CapacityExceeded { cap: self.capacity });
        }
        self.out.push(Simplex {
            vertices: clique.clone(),
            value,
        });
        if clique.len() > self.max_dim {
            return Ok(());
        }
        for (idx, &u) in candidates.iter().enumerate() {
            let u_us = u as usize;
            let new_value = clique
                .iter()
                .map(|&w| self.d.get(w as usize, u_us))
                .fold(value, f64::max);
            let next: Vec<u32> = if clique.len() == self.max_dim {
                Vec::new()
            } else {
                candidates[idx + 1..]
                    .iter()
                    .copied()
                    .filter(|&x| self.d.get(u_us, x as usize) <= self.threshold)
                    .collect()
            };
            clique.push(u);
            self.expand(clique, new_value, &next)?;
            clique.pop();
        }
        Ok(())
    }
}

/// Number of simplices in each dimension `0..=max_dim`.
pub fn simplex_count_by_dim(f: &Filtration) -> Vec<usize> {
    let mut counts = vec![0; f.max_dim() + 1];
    for s in f.simplices() {
        counts[s.dim()] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{euclidean_distances, PointCloud};

    pub(crate) fn unit_square() -> SquareMatrix {
        let pc = PointCloud::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        euclidean_distances(&pc).unwrap()
    }

    fn cfg(max_dim: usize, threshold: f64) -> RipsConfig {
        RipsConfig {
            max_dim,
            threshold,
            ..Default::default()
        }
    }

    #[test]
    fn unit_square_complex() {
        let f = build_rips(&unit_square(), &cfg(2, 2.0)).unwrap();
        assert_eq!(simplex_count_by_dim(&f), vec![4, 6, 4]);
        let edges: Vec<f64> = f.simplices().iter().filter(|s| s.dim() == 1).map(|s| s.value).collect();
        let r2 = 2f64.sqrt();
        assert_eq!(edges, vec![1.0, 1.0, 1.0, 1.0, r2, r2]);
        assert!(f.simplices().iter().filter(|s| s.dim() == 2).all(|s| s.value == r2));
        // Unit edges sorted lexicographically at equal value.
        let first: Vec<Vec<u32>> = f.simplices()[4..8].iter().map(|s| s.vertices.to_vec()).collect();
        assert_eq!(first, vec![vec![0, 1], vec![0, 3], vec![1, 2], vec![2, 3]]);
    }

    #[test]
    fn zero_threshold_gives_vertices_only() {
        let f = build_rips(&unit_square(), &cfg(2, 0.0)).unwrap();
        assert_eq!(simplex_count_by_dim(&f), vec![4, 0, 0]);
    }

    #[test]
    fn capacity_is_enforced() {
        let c = RipsConfig {
            max_dim: 2,
            threshold: 2.0,
            capacity: 10,
        };
        assert!(matches!(
            build_rips(&unit_square(), &c),
            Err(RipsError::CapacityExceeded { cap: 10 })
        ));
    }

    #[test]
    fn faces_precede_cofaces() {
        let f = build_rips(&unit_square(), &cfg(3, 2.0)).unwrap();
        let index = f.index();
        for (i, s) in f.simplices().iter().enumerate() {
            for face in s.faces() {
                assert!(index[&simplex_key(&face)] < i);
            }
        }
    }

    #[test]
    fn csv_dump_round_trips() {
        let f = build_rips(&unit_square(), &cfg(2, 1.5)).unwrap();
        let text = f.to_csv();
        assert!(text.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,0,0"));
        let back = Filtration::from_csv(text.as_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn from_simplices_rejects_missing_faces() {
        let s = Simplex {
            vertices: [0u32, 1].into_iter().collect(),
            value: 1.0,
        };
        assert!(Filtration::from_simplices(vec![s], 1, 1.0).is_err());
    }

    #[test]
    fn keys_are_unique() {
        let f = build_rips(&crate::data::euclidean_distances(
            &crate::data::sample_disk(12, 1.0, 1).unwrap(),
        ).unwrap(), &cfg(3, 10.0)).unwrap();
        assert_eq!(f.index().len(), f.len());
    }
}
