//! Per-sample operations shared by the subcommands and the pipeline.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use plstat_core::cycles::{self, TightCycle};
use plstat_core::data::{
    dynamical_distance, euclidean_distances, format_f64, load_matrix_csv, load_point_cloud_csv, sample_annulus_with,
    MatrixKind, PointCloud, SquareMatrix,
};
use plstat_core::landscape::{build_landscape, discretize, landscape_distance, landscape_integral, Norm};
use plstat_core::persistence::compute_persistence;
use plstat_core::rips::{build_rips, Filtration, RipsConfig};
use plstat_core::{rng, Barcode, PersistenceLandscape};

use crate::config::{GroupSource, RunConfig};
use crate::error::{CliError, CliResult, UserContext};

/// Triangle count above which the homology certificate of a tightened
/// cycle is skipped; the dense rank test is quadratic in it.
pub const CERTIFICATE_TRIANGLE_LIMIT: usize = 20_000;

#[derive(Debug, Clone)]
pub enum SampleInput {
    Points(PointCloud),
    Matrix(SquareMatrix),
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// `<group>-<index>`, zero-padded to two digits.
    pub name: String,
    pub group: usize,
    pub input: SampleInput,
}

/// Random stream of sample `index` in group `group`.
pub fn sample_stream(group: usize, index: usize) -> u64 {
    ((group as u64) << 32) | index as u64
}

pub fn sample_name(group: &str, index: usize) -> String {
    format!("{group}-{index:02}")
}

/// Draws or loads every sample named by the configuration.
pub fn load_samples(config: &RunConfig) -> CliResult<Vec<Sample>> {
    let mut out = Vec::new();
    for (g, group) in config.groups.iter().enumerate() {
        for index in 0..group.source.count() {
            let input = match &group.source {
                GroupSource::Disk { points, radius, .. } => {
                    let mut r = rng::stream(config.seed, sample_stream(g, index));
                    SampleInput::Points(sample_annulus_with(&mut r, *points, 0.0, *radius).user_ctx("sample")?)
                }
                GroupSource::Annulus { points, inner, outer, .. } => {
                    let mut r = rng::stream(config.seed, sample_stream(g, index));
                    SampleInput::Points(sample_annulus_with(&mut r, *points, *inner, *outer).user_ctx("sample")?)
                }
                GroupSource::Matrices { kind, paths } => {
                    let path = &paths[index];
                    SampleInput::Matrix(
                        load_matrix_csv(path, *kind)
                            .map_err(|e| CliError::user("load", format!("{}: {e}", path.display())))?,
                    )
                }
                GroupSource::Points { paths } => {
                    let path = &paths[index];
                    SampleInput::Points(
                        load_point_cloud_csv(path)
                            .map_err(|e| CliError::user("load", format!("{}: {e}", path.display())))?,
                    )
                }
            };
            out.push(Sample {
                name: sample_name(&group.name, index),
                group: g,
                input,
            });
        }
    }
    Ok(out)
}

/// Distance matrix of a sample; correlations go through `1 - |C|`.
pub fn distances(input: &SampleInput) -> CliResult<SquareMatrix> {
    match input {
        SampleInput::Points(pc) => euclidean_distances(pc).user_ctx("rips"),
        SampleInput::Matrix(m) => match m.kind() {
            MatrixKind::Distance => Ok(m.clone()),
            MatrixKind::Correlation => dynamical_distance(m).user_ctx("rips"),
        },
    }
}

pub fn rips_config(config: &RunConfig) -> RipsConfig {
    RipsConfig {
        max_dim: config.rips.max_dim,
        threshold: config.rips.threshold,
        capacity: config.rips.capacity,
    }
}

pub fn filtration(input: &SampleInput, config: &RunConfig) -> CliResult<Filtration> {
    build_rips(&distances(input)?, &rips_config(config)).user_ctx("rips")
}

/// Barcode of a sample; representatives are kept only when asked for.
pub fn barcode(input: &SampleInput, config: &RunConfig, representatives: bool) -> CliResult<(Barcode, Filtration)> {
    let f = filtration(input, config)?;
    Ok((compute_persistence(&f, representatives), f))
}

pub fn landscapes(barcodes: &[Barcode], degree: usize, cap: f64) -> CliResult<Vec<PersistenceLandscape>> {
    barcodes
        .iter()
        .map(|b| build_landscape(b, degree, cap).user_ctx("landscape"))
        .collect()
}

pub fn integrals(ls: &[PersistenceLandscape]) -> Vec<f64> {
    ls.iter().map(landscape_integral).collect()
}

/// Samples-by-features matrix of discretized landscapes, levels laid out
/// one after another. `levels == 0` keeps every level of the deepest one.
pub fn landscape_features(
    ls: &[PersistenceLandscape],
    grid_min: f64,
    grid_max: f64,
    grid_points: usize,
    levels: usize,
) -> CliResult<DMatrix<f64>> {
    let depth = if levels == 0 {
        ls.iter().map(|l| l.n_levels()).max().unwrap_or(0).max(1)
    } else {
        levels
    };
    let mut features = DMatrix::zeros(ls.len(), depth * grid_points);
    for (i, l) in ls.iter().enumerate() {
        let grid = discretize(l, grid_min, grid_max, grid_points, depth).user_ctx("pca")?;
        for k in 0..depth {
            for j in 0..grid_points {
                features[(i, k * grid_points + j)] = grid[(k, j)];
            }
        }
    }
    Ok(features)
}

/// Pairwise `L^p` distances between landscapes.
pub fn landscape_distance_matrix(ls: &[PersistenceLandscape], p: f64) -> CliResult<SquareMatrix> {
    let n = ls.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = landscape_distance(&ls[i], &ls[j], Norm::P(p)).user_ctx("embed")?;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    SquareMatrix::new(n, entries, MatrixKind::Distance).user_ctx("embed")
}

/// Result of tightening the most persistent loop of one sample.
#[derive(Debug, Clone)]
pub struct CycleReport {
    pub birth: f64,
    pub death: f64,
    pub seed_length: usize,
    pub cycle: TightCycle,
    /// `Some(true)` when the rank certificate was computed and holds.
    pub certified: Option<bool>,
    pub proximity: Vec<(u32, Option<usize>)>,
}

/// Tightens the representative of the longest finite degree-1 interval at
/// the midpoint of that interval. `barcode` must carry representatives.
pub fn tighten_most_persistent(
    f: &Filtration,
    barcode: &Barcode,
    max_rounds: usize,
    marked: &[u32],
) -> CliResult<CycleReport> {
    let value = cycles::midpoint_filtration(barcode, 1).user_ctx("cycle")?;
    // same choice as midpoint_filtration: longest, then earliest birth
    let mut interval = None;
    for i in barcode.in_degree(1).filter(|i| i.is_finite()) {
        match interval {
            Some(best) if !longer(i, best) => {}
            _ => interval = Some(i),
        }
    }
    let interval = interval.ok_or_else(|| CliError::internal("cycle", "no finite degree-1 interval"))?;
    let rep = plstat_core::persistence::representative_cycle(interval).user_ctx("cycle")?;
    let seed = cycles::edges_of(rep);
    let cycle = cycles::tighten_cycle(f, value, &seed, max_rounds).user_ctx("cycle")?;
    let triangles = f.prefix_at(value).iter().filter(|s| s.dim() == 2).count();
    let certified = (triangles <= CERTIFICATE_TRIANGLE_LIMIT).then(|| cycles::homologous_at(f, value, &seed, &cycle.edges));
    if certified == Some(false) {
        return Err(CliError::internal("cycle", "tightened cycle left its homology class"));
    }
    let proximity = if marked.is_empty() {
        Vec::new()
    } else {
        cycles::vertex_proximity(f, value, &cycle, marked)
    };
    Ok(CycleReport {
        birth: interval.birth,
        death: interval.death,
        seed_length: cycle_len(&seed),
        cycle,
        certified,
        proximity,
    })
}

fn longer(a: &plstat_core::PersistenceInterval, b: &plstat_core::PersistenceInterval) -> bool {
    a.length() > b.length() || (a.length() == b.length() && a.birth < b.birth)
}

fn cycle_len(edges: &[cycles::Edge]) -> usize {
    cycles::normalize_chain(edges).len()
}

impl CycleReport {
    pub fn summary(&self) -> String {
        let mut out = String::from("[cycle]\n");
        let _ = writeln!(out, "birth = {}", format_f64(self.birth));
        let _ = writeln!(out, "death = {}", format_f64(self.death));
        let _ = writeln!(out, "filtration_value = {}", format_f64(self.cycle.filtration_value));
        let _ = writeln!(out, "seed_length = {}", self.seed_length);
        let _ = writeln!(out, "length = {}", self.cycle.length);
        let cert = match self.certified {
            Some(true) => "verified",
            Some(false) => "failed",
            None => "skipped",
        };
        let _ = writeln!(out, "certificate = {cert}");
        out
    }
}
