//! Persistent homology over Z/2 by boundary-matrix reduction.
//!
//! Two reductions give the same pairing. [`reduce`] works on the boundary
//! matrix from the top dimension down with clearing and keeps the reduced
//! columns, which are the cycle representatives. [`persistence_pairs`] works
//! on the coboundary matrix from the bottom up, also with clearing; in a
//! dense Rips complex it only touches the few thousand edges instead of the
//! hundreds of thousands of triangles, so it is the default when no
//! representatives are wanted.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use crate::data::{format_f64, parse_f64};
use crate::f2::{self, BitVec};
use crate::rips::{Filtration, Simplex, Vertices};

/// Largest complex accepted by [`betti_numbers_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 5_000;

#[derive(Debug, Error)]
pub enum PersistenceError {
    #[error("complex has {size} simplices, brute force is limited to {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("no representative stored for this interval")]
    NoRepresentativeStored,
    #[error("representatives of infinite intervals are not supported")]
    InfiniteIntervalUnsupported,
    #[error("representatives are only available in degree >= 1")]
    UnsupportedDegree,
    #[error("malformed barcode at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceInterval {
    pub degree: usize,
    pub birth: f64,
    /// `f64::INFINITY` for classes that never die.
    pub death: f64,
    /// Simplices of a cycle representing the class, when requested.
    pub representative: Option<Vec<Vertices>>,
}

impl PersistenceInterval {
    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }

    pub fn length(&self) -> f64 {
        self.death - self.birth
    }

    /// Half-open membership `birth <= value < death`.
    pub fn contains(&self, value: f64) -> bool {
        self.birth <= value && value < self.death
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Barcode {
    pub intervals: Vec<PersistenceInterval>,
    pub degrees_computed: BTreeSet<usize>,
}

impl Barcode {
    pub fn in_degree(&self, degree: usize) -> impl Iterator<Item = &PersistenceInterval> {
        self.intervals.iter().filter(move |i| i.degree == degree)
    }

    /// Rank of the homology in `degree` at filtration value `value`, as read
    /// off the barcode.
    pub fn betti_at(&self, degree: usize, value: f64) -> usize {
        self.in_degree(degree).filter(|i| i.contains(value)).count()
    }

    /// `degree,birth,death` rows with a header; infinite deaths as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,birth,death\n");
        for i in &self.intervals {
            let _ = writeln!(out, "{},{},{}", i.degree, format_f64(i.birth), format_f64(i.death));
        }
        out
    }

    /// Parses the CSV written by [`Barcode::to_csv`]. Representatives are not
    /// part of the format; `degrees_computed` is the set of degrees present.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self, PersistenceError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| PersistenceError::Malformed {
                line: 0,
                reason: e.to_string(),
            })?;
        let mut barcode = Barcode::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("degree")) {
                continue;
            }
            let bad = |reason: &str| PersistenceError::Malformed {
                line: lineno + 1,
                reason: reason.into(),
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(bad("expected degree,birth,death"));
            }
            let degree: usize = cells[0].trim().parse().map_err(|_| bad("bad degree"))?;
            let birth = parse_f64(cells[1]).filter(|b| b.is_finite()).ok_or_else(|| bad("bad birth"))?;
            let death = parse_f64(cells[2]).filter(|&d| d >= birth).ok_or_else(|| bad("bad death"))?;
            barcode.degrees_computed.insert(degree);
            barcode.intervals.push(PersistenceInterval {
                degree,
                birth,
                death,
                representative: None,
            });
        }
        Ok(barcode)
    }
}

/// Output of the column reduction, in filtration positions.
#[derive(Debug, Clone)]
pub struct Reduction {
    /// `(birth simplex, death simplex)` for every positive simplex.
    pub pairs: Vec<(usize, Option<usize>)>,
    /// Reduced boundary columns; empty for positive or cleared columns.
    pub columns: Vec<Vec<usize>>,
}

/// Boundary-matrix reduction with clearing.
pub fn reduce(f: &Filtration) -> Reduction {
    const NONE: usize = usize::MAX;
    let simplices = f.simplices();
    let boundaries = f.boundaries();
    let len = simplices.len();
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); f.max_dim() + 1];
    for (j, s) in simplices.iter().enumerate() {
        by_dim[s.dim()].push(j);
    }

    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut pivot_owner = vec![NONE; len];
    let mut cleared = vec![false; len];
    let mut scratch = Vec::new();

    for dim in (1..=f.max_dim()).rev() {
        for &j in &by_dim[dim] {
            if cleared[j] {
                continue;
            }
            let mut col = boundaries[j].clone();
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low];
                if owner == NONE {
                    break;
                }
                symmetric_difference(&col, &columns[owner], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_owner[low] = j;
                cleared[low] = true;
            }
            columns[j] = col;
        }
    }

    let mut pairs = Vec::new();
    for j in 0..len {
        if !columns[j].is_empty() {
            continue;
        }
        let death = pivot_owner[j];
        pairs.push((j, (death != NONE).then_some(death)));
    }
    Reduction { pairs, columns }
}

fn symmetric_difference(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Barcode of `f` in degrees `0..max_dim`.
///
/// Degree `max_dim` is left out: without `(max_dim + 1)`-simplices its
/// classes can never be seen to die. Zero-length intervals are dropped.
pub fn compute_persistence(f: &Filtration, keep_representatives: bool) -> Barcode {
    if keep_representatives {
        let reduction = reduce(f);
        barcode_from_pairs(f, &reduction.pairs, Some(&reduction.columns))
    } else {
        barcode_from_pairs(f, &persistence_pairs(f), None)
    }
}

/// `(birth, death)` positions for every simplex of dimension below
/// `max_dim` that creates a class, by reducing the coboundary matrix.
///
/// Columns are processed from the youngest simplex to the oldest and the
/// pivot of a column is its oldest coface. A simplex that is the pivot of a
/// column one dimension down kills a class and its own column is skipped.
pub fn persistence_pairs(f: &Filtration) -> Vec<(usize, Option<usize>)> {
    const NONE: usize = usize::MAX;
    let simplices = f.simplices();
    let len = simplices.len();
    let mut cofaces: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (j, col) in f.boundaries().into_iter().enumerate() {
        for i in col {
            cofaces[i].push(j);
        }
    }
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); f.max_dim() + 1];
    for (j, s) in simplices.iter().enumerate() {
        by_dim[s.dim()].push(j);
    }

    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut pivot_owner = vec![NONE; len];
    let mut is_death = vec![false; len];
    let mut scratch = Vec::new();
    let mut pairs = Vec::new();
    for dim in 0..f.max_dim() {
        for &j in by_dim[dim].iter().rev() {
            if is_death[j] {
                continue;
            }
            let mut col = std::mem::take(&mut cofaces[j]);
            while let Some(&pivot) = col.first() {
                let owner = pivot_owner[pivot];
                if owner == NONE {
                    break;
                }
                symmetric_difference(&col, &columns[owner], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            match col.first() {
                Some(&pivot) => {
                    pivot_owner[pivot] = j;
                    is_death[pivot] = true;
                    pairs.push((j, Some(pivot)));
                }
                None => pairs.push((j, None)),
            }
            columns[j] = col;
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Barcode from `(birth, death)` positions; `columns`, when given, are the
/// reduced boundary columns from [`reduce`] and supply representatives.
pub fn barcode_from_pairs(
    f: &Filtration,
    pairs: &[(usize, Option<usize>)],
    columns: Option<&[Vec<usize>]>,
) -> Barcode {
    let simplices = f.simplices();
    let degrees_computed: BTreeSet<usize> = (0..f.max_dim()).collect();
    let mut intervals = Vec::new();
    for &(b, d) in pairs {
        let degree = simplices[b].dim();
        if !degrees_computed.contains(&degree) {
            continue;
        }
        let birth = simplices[b].value;
        let death = d.map_or(f64::INFINITY, |d| simplices[d].value);
        if death == birth {
            continue;
        }
        let representative = match (d, columns) {
            (Some(d), Some(columns)) if degree >= 1 => Some(
                columns[d]
                    .iter()
                    .map(|&k| simplices[k].vertices.clone())
                    .collect(),
            ),
            _ => None,
        };
        intervals.push(PersistenceInterval {
            degree,
            birth,
            death,
            representative,
        });
    }
    intervals.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
    Barcode {
        intervals,
        degrees_computed,
    }
}

/// The stored cycle of a finite interval of degree at least one.
pub fn representative_cycle<'a>(
    interval: &'a PersistenceInterval,
) -> Result<&'a [Vertices], PersistenceError> {
    if !interval.is_finite() {
        return Err(PersistenceError::InfiniteIntervalUnsupported);
    }
    if interval.degree == 0 {
        return Err(PersistenceError::UnsupportedDegree);
    }
    interval
        .representative
        .as_deref()
        .ok_or(PersistenceError::NoRepresentativeStored)
}

/// Z/2 boundary of a chain given as vertex lists; empty for a cycle.
pub fn chain_boundary(chain: &[Vertices]) -> BTreeSet<Vertices> {
    let mut out = BTreeSet::new();
    for s in chain {
        let simplex = Simplex {
            vertices: s.clone(),
            value: 0.0,
        };
        for face in simplex.faces() {
            if !out.remove(&face) {
                out.insert(face);
            }
        }
    }
    out
}

/// Betti numbers of the complex at `value` in degrees `0..max_dim`, by rank
/// computations on dense boundary matrices.
pub fn betti_numbers_bruteforce(f: &Filtration, value: f64) -> Result<Vec<usize>, PersistenceError> {
    let complex = f.prefix_at(value);
    if complex.len() > BRUTEFORCE_LIMIT {
        return Err(PersistenceError::TooLarge {
            size: complex.len(),
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let top = f.max_dim();
    let mut by_dim: Vec<Vec<&[u32]>> = vec![Vec::new(); top + 1];
    for s in complex {
        by_dim[s.dim()].push(&s.vertices);
    }
    let positions: Vec<HashMap<&[u32], usize>> = by_dim
        .iter()
        .map(|list| list.iter().enumerate().map(|(i, v)| (*v, i)).collect())
        .collect();

    // rank of the boundary map from dimension k to k - 1
    let boundary_rank = |k: usize| -> usize {
        if k == 0 || k > top {
            return 0;
        }
        let rows = by_dim[k - 1].len();
        f2::rank(by_dim[k].iter().map(|verts| {
            let faces = (0..verts.len()).map(|skip| {
                let face: Vec<u32> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                positions[k - 1][face.as_slice()]
            });
            BitVec::from_indices(rows, faces)
        }))
    };
    let ranks: Vec<usize> = (0..=top + 1).map(boundary_rank).collect();
    Ok((0..top)
        .map(|k| by_dim[k].len() - ranks[k] - ranks[k + 1])
        .collect())
}
