//! The full run: samples → barcodes → landscapes → tests, PCA, Isomap,
//! cycles and plots, with a manifest describing what was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use plstat_core::data::{format_f64, matrix_to_csv, point_cloud_to_csv, SquareMatrix};
use plstat_core::embedding::{embedding_error, isomap, Embedding, EmbeddingError, Neighborhood, SCREE_DIMS};
use plstat_core::inference::{
    linear_separability, pca, permutation_test, PermutationConfig, PermutationTestResult, Separability,
    HISTOGRAM_BINS,
};
use plstat_core::landscape::mean_landscape;
use plstat_core::{Barcode, PersistenceLandscape};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{GroupSource, RunConfig};
use crate::error::{CliError, CliResult, UserContext};
use crate::io::write_atomic;
use crate::stages::{self, CycleReport, SampleInput};
use crate::svg;

/// Levels drawn in landscape plots.
pub const PLOT_LEVELS: usize = 10;
pub const MANIFEST: &str = "manifest.json";

/// Writes files under a root directory and remembers their digests.
pub struct Artifacts {
    root: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            digests: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, relative: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let bytes = contents.as_ref();
        write_atomic(&self.root.join(relative), bytes)?;
        self.digests
            .insert(relative.to_owned(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn digests(&self) -> &BTreeMap<String, String> {
        &self.digests
    }
}

/// Numbers an acceptance check or a caller may want without reparsing files.
#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub sample_names: Vec<String>,
    pub tests: Vec<(usize, PermutationTestResult)>,
    pub separability: Option<Separability>,
    /// `(max_abs, mse)` of the Isomap embedding against the landscape distances.
    pub embedding_error: Option<(f64, f64)>,
    pub cycles: Vec<(String, CycleReport)>,
}

struct Timer {
    last: Instant,
    stages: Vec<(&'static str, f64)>,
}

impl Timer {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.stages.push((stage, (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

pub fn run_pipeline(config: &RunConfig, out: &Path, threads: Option<usize>) -> CliResult<PipelineSummary> {
    config.validate()?;
    let started = Instant::now();
    let mut timer = Timer::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::internal("pipeline", e))?;
    let mut files = Artifacts::new(out);
    let group_names: Vec<&str> = config.groups.iter().map(|g| g.name.as_str()).collect();

    let samples = stages::load_samples(config)?;
    for s in &samples {
        let sampled = matches!(
            config.groups[s.group].source,
            GroupSource::Disk { .. } | GroupSource::Annulus { .. }
        );
        if let (true, SampleInput::Points(pc)) = (sampled, &s.input) {
            files.write(&format!("samples/{}.csv", s.name), point_cloud_to_csv(pc))?;
        }
    }
    timer.lap("sample");
    log::info!("{} samples in {} groups", samples.len(), config.groups.len());

    let wants_cycle =
        |name: &str| config.cycle.enabled && (config.cycle.samples.is_empty() || config.cycle.samples.iter().any(|s| s == name));
    let computed: Vec<CliResult<(Barcode, Option<String>, Option<CycleReport>)>> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let cycle = wants_cycle(&s.name);
                let (barcode, f) = stages::barcode(&s.input, config, cycle)?;
                let filtration_csv = config.output.write_filtrations.then(|| f.to_csv());
                let report = if cycle && barcode.in_degree(1).any(|i| i.is_finite()) {
                    Some(stages::tighten_most_persistent(&f, &barcode, config.cycle.max_rounds, &config.cycle.marked)?)
                } else {
                    None
                };
                Ok((barcode, filtration_csv, report))
            })
            .collect()
    });
    let mut barcodes = Vec::with_capacity(samples.len());
    let mut cycle_reports = Vec::new();
    for (s, result) in samples.iter().zip(computed) {
        let (barcode, filtration_csv, report) =
            result.map_err(|e| CliError { message: format!("{}: {}", s.name, e.message), ..e })?;
        files.write(&format!("barcodes/{}.csv", s.name), barcode.to_csv())?;
        if let Some(csv) = filtration_csv {
            files.write(&format!("filtrations/{}.csv", s.name), csv)?;
        }
        if let Some(r) = report {
            files.write(&format!("cycles/{}.csv", s.name), r.cycle.to_csv())?;
            files.write(&format!("cycles/{}.txt", s.name), r.summary())?;
            if !r.proximity.is_empty() {
                files.write(
                    &format!("cycles/{}_proximity.csv", s.name),
                    plstat_core::cycles::proximity_csv(&r.proximity),
                )?;
            }
            cycle_reports.push((s.name.clone(), r));
        }
        barcodes.push(barcode);
    }
    timer.lap("persistence");

    let cap = config.infinite_cap();
    let mut by_degree: BTreeMap<usize, Vec<PersistenceLandscape>> = BTreeMap::new();
    for degree in config.landscape_degrees() {
        let ls = stages::landscapes(&barcodes, degree, cap)?;
        for (s, l) in samples.iter().zip(&ls) {
            files.write(&format!("landscapes/degree{degree}/{}.json", s.name), l.to_json())?;
        }
        for (g, name) in group_names.iter().enumerate() {
            let members: Vec<PersistenceLandscape> = samples
                .iter()
                .zip(&ls)
                .filter(|(s, _)| s.group == g)
                .map(|(_, l)| l.clone())
                .collect();
            let mean = mean_landscape(&members).user_ctx("landscape")?;
            files.write(&format!("landscapes/degree{degree}/mean_{name}.json"), mean.to_json())?;
            if config.output.plots {
                files.write(
                    &format!("plots/landscape_degree{degree}_mean_{name}.svg"),
                    svg::plot_landscape(&mean, &format!("mean degree-{degree} landscape, {name}"), PLOT_LEVELS),
                )?;
            }
        }
        let mut csv = String::from("sample,group,integral\n");
        for (s, v) in samples.iter().zip(stages::integrals(&ls)) {
            let _ = writeln!(csv, "{},{},{}", s.name, group_names[s.group], format_f64(v));
        }
        files.write(&format!("integrals/degree{degree}.csv"), csv)?;
        by_degree.insert(degree, ls);
    }
    timer.lap("landscape");

    let mut tests = Vec::new();
    for &degree in &config.test.degrees {
        let values = stages::integrals(&by_degree[&degree]);
        let split = |g: usize| -> Vec<f64> {
            samples.iter().zip(&values).filter(|(s, _)| s.group == g).map(|(_, &v)| v).collect()
        };
        let permutation = PermutationConfig {
            exhaustive_limit: config.test.exhaustive_limit,
            monte_carlo_samples: config.test.monte_carlo_samples,
            seed: config.seed.wrapping_add(degree as u64),
        };
        let result = permutation_test(&split(0), &split(1), &permutation).user_ctx("test")?;
        let title = format!("degree-{degree} landscape integral, {} vs {}", group_names[0], group_names[1]);
        files.write(&format!("tests/degree{degree}.txt"), result.report(&title))?;
        files.write(&format!("tests/degree{degree}_null.csv"), null_csv(&result.null_distribution))?;
        if config.output.plots {
            files.write(
                &format!("plots/null_degree{degree}.svg"),
                svg::plot_null_histogram(&result.null_distribution, result.t_obs, HISTOGRAM_BINS, &title),
            )?;
        }
        log::info!("degree {degree}: t = {}, p = {}", result.t_obs, result.p_value);
        tests.push((degree, result));
    }
    timer.lap("test");

    let mut separability = None;
    if config.pca.enabled {
        let degree = config.pca.degree;
        let features = stages::landscape_features(
            &by_degree[&degree],
            config.landscape.grid_min,
            config.grid_max(),
            config.landscape.grid_points,
            config.pca.levels,
        )?;
        let result = pca(&features, config.pca.standardize).user_ctx("pca")?;
        let mut scores = String::from("sample,group");
        for c in 0..result.scores.ncols() {
            let _ = write!(scores, ",pc{}", c + 1);
        }
        scores.push('\n');
        for (i, s) in samples.iter().enumerate() {
            let _ = write!(scores, "{},{}", s.name, group_names[s.group]);
            for c in 0..result.scores.ncols() {
                let _ = write!(scores, ",{}", format_f64(result.scores[(i, c)]));
            }
            scores.push('\n');
        }
        files.write(&format!("pca/degree{degree}_scores.csv"), scores)?;
        let mut summary = String::from("[pca]\n");
        let _ = writeln!(summary, "degree = {degree}");
        let _ = writeln!(summary, "standardize = {}", config.pca.standardize);
        let _ = writeln!(summary, "features = {}", features.ncols());
        let _ = writeln!(summary, "kept_features = {}", result.kept_columns.len());
        let _ = writeln!(summary, "eigenvalues = {}", join(&result.eigenvalues));
        let _ = writeln!(summary, "variance_explained = {}", join(&result.variance_explained));
        if config.groups.len() == 2 {
            let k = config.pca.components.min(result.scores.ncols());
            let points: Vec<Vec<f64>> = (0..samples.len())
                .map(|i| (0..k).map(|c| result.scores[(i, c)]).collect())
                .collect();
            let labels: Vec<bool> = samples.iter().map(|s| s.group == 0).collect();
            let sep = linear_separability(&points, &labels).user_ctx("pca")?;
            let _ = writeln!(summary, "\n[separability]");
            let _ = writeln!(summary, "components = {k}");
            let _ = writeln!(summary, "separable = {}", sep.is_separable());
            if let Separability::Separable(h) = &sep {
                let _ = writeln!(summary, "normal = {}", join(&h.normal));
                let _ = writeln!(summary, "offset = {}", format_f64(h.offset));
                let _ = writeln!(summary, "margin = {}", format_f64(h.margin));
            }
            separability = Some(sep);
        }
        files.write(&format!("pca/degree{degree}.txt"), summary)?;
    }
    timer.lap("pca");

    let mut embed_error = None;
    if config.embedding.enabled {
        let degree = config.embedding.degree;
        let d = stages::landscape_distance_matrix(&by_degree[&degree], config.embedding.p)?;
        files.write("embedding/landscape_distances.csv", matrix_to_csv(&d))?;
        let rule = match config.neighborhood() {
            Neighborhood::Knn(k) => Neighborhood::Knn(k.min(d.n().saturating_sub(1)).max(1)),
            other => other,
        };
        let target = config.embedding.target_dim.min(d.n().saturating_sub(1)).max(1);
        let e = connected_isomap(&d, rule, target, config.embedding.connect)?;
        let err = embedding_error(&d, &e).user_ctx("embed")?;
        let mut coords = String::from("sample,group");
        for c in 0..e.dim() {
            let _ = write!(coords, ",x{}", c + 1);
        }
        coords.push('\n');
        for (i, s) in samples.iter().enumerate() {
            let _ = write!(coords, "{},{}", s.name, group_names[s.group]);
            for c in 0..e.dim() {
                let _ = write!(coords, ",{}", format_f64(e.coordinates[(i, c)]));
            }
            coords.push('\n');
        }
        files.write("embedding/coordinates.csv", coords)?;
        files.write("embedding/scree.csv", e.scree_csv())?;
        let mut meta = e.metadata();
        let _ = writeln!(meta, "degree = {degree}");
        let _ = writeln!(meta, "p = {}", format_f64(config.embedding.p));
        let _ = writeln!(meta, "max_abs_error = {}", format_f64(err.0));
        let _ = writeln!(meta, "mean_squared_error = {}", format_f64(err.1));
        files.write("embedding/isomap.txt", meta)?;
        if config.output.plots {
            let rows: Vec<(usize, f64)> = e
                .residual_variance
                .iter()
                .take(SCREE_DIMS)
                .enumerate()
                .map(|(i, &r)| (i + 1, r))
                .collect();
            files.write(
                "plots/scree.svg",
                svg::plot_scree(&rows, &format!("Isomap of degree-{degree} landscapes")),
            )?;
        }
        embed_error = Some(err);
    }
    timer.lap("embed");

    if config.output.plots {
        for (s, b) in samples.iter().zip(&barcodes) {
            files.write(&format!("plots/barcode_{}.svg", s.name), svg::plot_barcode(b, &format!("barcode, {}", s.name)))?;
        }
    }
    files.write("config.toml", config.to_toml())?;
    timer.lap("plot");

    let manifest = manifest(config, &files, threads, started.elapsed().as_secs_f64(), &timer.stages);
    write_atomic(&out.join(MANIFEST), manifest.as_bytes())?;

    Ok(PipelineSummary {
        sample_names: samples.iter().map(|s| s.name.clone()).collect(),
        tests,
        separability,
        embedding_error: embed_error,
        cycles: cycle_reports,
    })
}

/// Isomap, retrying with larger `k` on a disconnected kNN graph when allowed.
fn connected_isomap(d: &SquareMatrix, rule: Neighborhood, target: usize, connect: bool) -> CliResult<Embedding> {
    let mut rule = rule;
    loop {
        match (isomap(d, rule, target), rule) {
            (Err(EmbeddingError::DisconnectedGraph { components }), Neighborhood::Knn(k)) if connect && k + 1 < d.n() => {
                log::warn!("k = {k} leaves {components} components; trying k = {}", k + 1);
                rule = Neighborhood::Knn(k + 1);
            }
            (result, _) => return result.user_ctx("embed"),
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(",")
}

/// One statistic per line; the first line is the observed split.
pub fn null_csv(null: &[f64]) -> String {
    let mut out = String::from("statistic\n");
    for &t in null {
        out.push_str(&format_f64(t));
        out.push('\n');
    }
    out
}

/// Everything except the `runtime` object is a function of the config.
fn manifest(
    config: &RunConfig,
    files: &Artifacts,
    threads: Option<usize>,
    total: f64,
    stages: &[(&'static str, f64)],
) -> String {
    let stage_times: serde_json::Map<String, serde_json::Value> =
        stages.iter().map(|(s, t)| (s.to_string(), json!(t))).collect();
    let value = json!({
        "tool": "plstat",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": plstat_core::VERSION,
        "config_hash": config.hash(),
        "seeds": {
            "master": config.seed,
            "samples": "ChaCha8 seeded with the master seed, stream (group_index << 32) | sample_index",
            "monte_carlo": "master seed + degree, stream 0",
        },
        "stages": stages.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        "artifacts": files.digests(),
        "runtime": {
            "threads": threads.unwrap_or(0),
            "wall_time_seconds": total,
            "stage_seconds": stage_times,
        },
    });
    let mut text = serde_json::to_string_pretty(&value).expect("manifest serializes");
    text.push('\n');
    text
}
