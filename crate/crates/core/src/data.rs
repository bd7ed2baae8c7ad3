//! Input matrices, point clouds and the synthetic shape samplers.
//!
//! Matrices are stored row-major as `f64`. Correlation matrices are turned
//! into distances with `D_ij = 1 - |C_ij|`; point clouds are turned into
//! distances with the Euclidean norm.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rng;

/// Largest asymmetry that is silently averaged away on load.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NonSquare { rows: usize, row: usize, cols: usize },
    #[error("matrix asymmetry {asymmetry:e} at ({i}, {j}) exceeds tolerance")]
    AsymmetryTooLarge { i: usize, j: usize, asymmetry: f64 },
    #[error("entry ({i}, {j}) = {value} is out of range for a {kind:?} matrix")]
    OutOfRangeEntry { i: usize, j: usize, value: f64, kind: MatrixKind },
    #[error("entry ({i}, {j}) is not a finite number")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("cannot parse {token:?} at row {row}, column {col}")]
    Parse { row: usize, col: usize, token: String },
    #[error("expected a {expected:?} matrix, got {found:?}")]
    WrongKind { expected: MatrixKind, found: MatrixKind },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {index} has dimension {found}, expected {expected}")]
    RaggedCloud { index: usize, expected: usize, found: usize },
    #[error("invalid radii: inner {inner}, outer {outer}")]
    BadRadii { inner: f64, outer: f64 },
    #[error("sample size must be at least 1")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Correlation,
    Distance,
}

/// A validated symmetric matrix of correlations or distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<f64>,
    kind: MatrixKind,
}

impl SquareMatrix {
    /// Validates `entries` (row-major, `n * n` values).
    ///
    /// Asymmetry up to [`SYMMETRY_TOLERANCE`] is removed by averaging with the
    /// transpose; anything larger is rejected.
    pub fn new(n: usize, mut entries: Vec<f64>, kind: MatrixKind) -> Result<Self, DataError> {
        if entries.len() != n * n {
            return Err(DataError::NonSquare {
                rows: n,
                row: 0,
                cols: entries.len() / n.max(1),
            });
        }
        for i in 0..n {
            for j in 0..n {
                if !entries[i * n + j].is_finite() {
                    return Err(DataError::NonFiniteEntry { i, j });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                let asymmetry = (a - b).abs();
                if asymmetry > SYMMETRY_TOLERANCE {
                    return Err(DataError::AsymmetryTooLarge { i, j, asymmetry });
                }
                if a != b {
                    let mean = 0.5 * (a + b);
                    entries[i * n + j] = mean;
                    entries[j * n + i] = mean;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let value = entries[i * n + j];
                let ok = match kind {
                    MatrixKind::Correlation => {
                        (-1.0..=1.0).contains(&value) && (i != j || value == 1.0)
                    }
                    MatrixKind::Distance => value >= 0.0 && (i != j || value == 0.0),
                };
                if !ok {
                    return Err(DataError::OutOfRangeEntry { i, j, value, kind });
                }
            }
        }
        Ok(Self { n, entries, kind })
    }

    /// Builds a matrix from a closure evaluated on the upper triangle.
    pub fn from_fn(
        n: usize,
        kind: MatrixKind,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, DataError> {
        let diag = match kind {
            MatrixKind::Correlation => 1.0,
            MatrixKind::Distance => 0.0,
        };
        let mut entries = vec![diag; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries, kind)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    fn require(&self, expected: MatrixKind) -> Result<(), DataError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(DataError::WrongKind {
                expected,
                found: self.kind,
            })
        }
    }
}

/// Points in `R^d`, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let dim = points.first().map(Vec::len).ok_or(DataError::EmptyCloud)?;
        if dim == 0 {
            return Err(DataError::RaggedCloud {
                index: 0,
                expected: 1,
                found: 0,
            });
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DataError::RaggedCloud {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if let Some(j) = p.iter().position(|x| !x.is_finite()) {
                return Err(DataError::NonFiniteEntry { i: index, j });
            }
        }
        Ok(Self {
            points,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.points.len(), "one label per point");
        self.labels = Some(labels);
        self
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// `D_ij = 1 - |C_ij|`.
pub fn dynamical_distance(c: &SquareMatrix) -> Result<SquareMatrix, DataError> {
    c.require(MatrixKind::Correlation)?;
    let n = c.n();
    let mut entries: Vec<f64> = c.entries.iter().map(|v| 1.0 - v.abs()).collect();
    for i in 0..n {
        entries[i * n + i] = 0.0;
    }
    Ok(SquareMatrix {
        n,
        entries,
        kind: MatrixKind::Distance,
    })
}

pub fn euclidean_distances(pc: &PointCloud) -> Result<SquareMatrix, DataError> {
    if pc.is_empty() {
        return Err(DataError::EmptyCloud);
    }
    let pts = pc.points();
    let n = pts.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(SquareMatrix {
        n,
        entries,
        kind: MatrixKind::Distance,
    })
}

/// Uniform-by-area sample from the disk of the given radius.
pub fn sample_disk(n: usize, radius: f64, seed: u64) -> Result<PointCloud, DataError> {
    sample_annulus(n, 0.0, radius, seed)
}

/// Uniform-by-area sample from the annulus `r_inner <= |x| <= r_outer`.
///
/// The radius is drawn by inverting its CDF,
/// `r = sqrt(u (r_out^2 - r_in^2) + r_in^2)`, so exactly `n` points are
/// produced for every seed.
pub fn sample_annulus(
    n: usize,
    r_inner: f64,
    r_outer: f64,
    seed: u64,
) -> Result<PointCloud, DataError> {
    let mut rng = rng::stream(seed, 0);
    sample_annulus_with(&mut rng, n, r_inner, r_outer)
}

pub fn sample_annulus_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    r_inner: f64,
    r_outer: f64,
) -> Result<PointCloud, DataError> {
    if !(r_inner.is_finite() && r_outer.is_finite() && 0.0 <= r_inner && r_inner < r_outer) {
        return Err(DataError::BadRadii {
            inner: r_inner,
            outer: r_outer,
        });
    }
    if n == 0 {
        return Err(DataError::EmptySample);
    }
    let (lo2, hi2) = (r_inner * r_inner, r_outer * r_outer);
    let points = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            let r = (u * (hi2 - lo2) + lo2).sqrt();
            vec![r * theta.cos(), r * theta.sin()]
        })
        .collect();
    PointCloud::new(points)
}

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Parses a float, accepting `inf`/`-inf`.
pub fn parse_f64(token: &str) -> Option<f64> {
    let t = token.trim();
    match t {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-Inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => t.parse().ok(),
    }
}

/// Reads a numeric CSV table. A single header row is skipped when its first
/// cell does not parse as a number.
pub fn read_numeric_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && record.get(0).map_or(false, |t| parse_f64(t).is_none()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, token)| {
                parse_f64(token).ok_or_else(|| DataError::Parse {
                    row,
                    col,
                    token: token.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn parse_matrix_csv<R: Read>(reader: R, kind: MatrixKind) -> Result<SquareMatrix, DataError> {
    let rows = read_numeric_csv(reader)?;
    let n = rows.len();
    let mut entries = Vec::with_capacity(n * n);
    for (row, values) in rows.into_iter().enumerate() {
        if values.len() != n {
            return Err(DataError::NonSquare {
                rows: n,
                row,
                cols: values.len(),
            });
        }
        entries.extend(values);
    }
    if n == 0 {
        return Err(DataError::NonSquare {
            rows: 0,
            row: 0,
            cols: 0,
        });
    }
    SquareMatrix::new(n, entries, kind)
}

pub fn load_matrix_csv(path: impl AsRef<Path>, kind: MatrixKind) -> Result<SquareMatrix, DataError> {
    parse_matrix_csv(BufReader::new(File::open(path)?), kind)
}

pub fn matrix_to_csv(m: &SquareMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.n() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_matrix_csv<W: Write>(mut w: W, m: &SquareMatrix) -> std::io::Result<()> {
    w.write_all(matrix_to_csv(m).as_bytes())
}

pub fn parse_point_cloud_csv<R: Read>(reader: R) -> Result<PointCloud, DataError> {
    PointCloud::new(read_numeric_csv(reader)?)
}

pub fn load_point_cloud_csv(path: impl AsRef<Path>) -> Result<PointCloud, DataError> {
    parse_point_cloud_csv(BufReader::new(File::open(path)?))
}

pub fn point_cloud_to_csv(pc: &PointCloud) -> String {
    let mut out = String::new();
    for p in pc.points() {
        let row: Vec<String> = p.iter().map(|&v| format_f64(v)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
