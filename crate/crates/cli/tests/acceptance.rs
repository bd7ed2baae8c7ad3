//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the report is printed on
//! every `cargo test`. Exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use plstat::config::{GroupConfig, GroupSource, RunConfig};
use plstat::run_pipeline;
use plstat_core::cycles::{edges_of, homologous_at, normalize_chain, tighten_cycle};
use plstat_core::data::{euclidean_distances, format_f64, MatrixKind, PointCloud, SquareMatrix};
use plstat_core::embedding::{embedding_error, isomap, Neighborhood};
use plstat_core::inference::{binomial, permutation_test, NullKind, PermutationConfig};
use plstat_core::landscape::{
    evaluate, landscape_distance, landscape_from_intervals, landscape_kernel, Norm, PersistenceLandscape,
};
use plstat_core::persistence::{betti_numbers_bruteforce, compute_persistence};
use plstat_core::rips::{build_rips, RipsConfig};
use plstat_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

// Pinned tolerances and budgets.
const DISK_SEEDS: u64 = 20;
const DEGREE1_MEDIAN_P: f64 = 0.01;
const DEGREE1_P: f64 = 0.05;
const DEGREE1_FRACTION: f64 = 0.95;
const DEGREE0_MEDIAN_P: f64 = 0.10;
const DISK_BUDGET: Duration = Duration::from_secs(300);
const COUNT_BUDGET: Duration = Duration::from_secs(1);
const BETTI_CASES: u64 = 200;
const BETTI_BUDGET: Duration = Duration::from_secs(120);
const LANDSCAPE_CASES: u64 = 500;
const LANDSCAPE_ORACLE_TOL: f64 = 1e-12;
const LANDSCAPE_METRIC_TOL: f64 = 1e-9;
const LANDSCAPE_BUDGET: Duration = Duration::from_secs(60);
const ISOMAP_MAX_ABS: f64 = 1e-8;
const ISOMAP_MSE: f64 = 1e-16;
const CYCLE_CASES: u64 = 100;
const CYCLE_BUDGET: Duration = Duration::from_secs(60);
/// Cohen's d of the degree-0 landscape integrals (pooled standard deviation).
const CORRELATION_EFFECT_SIZE: f64 = 2.0;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn disk_annulus(report: &mut Report) {
    let started = Instant::now();
    let (mut p0, mut p1) = (Vec::new(), Vec::new());
    let mut null_sizes_ok = true;
    for seed in 0..DISK_SEEDS {
        let mut config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        config.output.plots = false;
        config.pca.enabled = false;
        config.embedding.enabled = false;
        let dir = tempfile::tempdir().unwrap();
        let summary = run_pipeline(&config, dir.path(), None).expect("pipeline runs");
        for (degree, t) in &summary.tests {
            null_sizes_ok &= t.kind == NullKind::ExhaustiveCollapsed && t.m == 92_378;
            match degree {
                0 => p0.push(t.p_value),
                1 => p1.push(t.p_value),
                _ => {}
            }
        }
    }
    let elapsed = started.elapsed();
    let fraction = p1.iter().filter(|&&p| p <= DEGREE1_P).count() as f64 / p1.len() as f64;
    let m1 = median(&p1);
    report.line(
        1,
        "disk/annulus degree-1 permutation test",
        m1 <= DEGREE1_MEDIAN_P && fraction >= DEGREE1_FRACTION && null_sizes_ok && elapsed <= DISK_BUDGET,
        format!(
            "median p = {} (<= {DEGREE1_MEDIAN_P}), p <= {DEGREE1_P} in {:.0}% of {DISK_SEEDS} seeds (>= {:.0}%), m = 92378: {null_sizes_ok}, {:.1}s (<= {}s)",
            format_f64(m1),
            100.0 * fraction,
            100.0 * DEGREE1_FRACTION,
            elapsed.as_secs_f64(),
            DISK_BUDGET.as_secs()
        ),
    );
    let m0 = median(&p0);
    report.line(
        2,
        "disk/annulus degree-0 permutation test",
        m0 <= DEGREE0_MEDIAN_P,
        format!("median p = {} (<= {DEGREE0_MEDIAN_P}) over {DISK_SEEDS} seeds", format_f64(m0)),
    );
}

fn permutation_counts(report: &mut Report) {
    let started = Instant::now();
    let xs1: Vec<f64> = (0..7).map(|i| i as f64).collect();
    let xs2: Vec<f64> = (0..7).map(|i| 100.0 + i as f64).collect();
    let t = permutation_test(&xs1, &xs2, &PermutationConfig::default()).unwrap();
    let elapsed = started.elapsed();
    let pass = binomial(14, 7) == 3432
        && t.null_distribution.len() == 1716
        && t.m == 1716
        && t.p_value == 1.0 / 1716.0
        && elapsed <= COUNT_BUDGET;
    report.line(
        3,
        "7v7 null size and minimum p",
        pass,
        format!(
            "null size {}, min p = {} (1/1716 = {}), {:.3}s",
            t.null_distribution.len(),
            format_f64(t.p_value),
            format_f64(1.0 / 1716.0),
            elapsed.as_secs_f64()
        ),
    );
}

fn random_distances(n: usize, seed: u64) -> SquareMatrix {
    let mut r = rng::stream(seed, 101);
    // a coarse grid makes tied filtration values common
    SquareMatrix::from_fn(n, MatrixKind::Distance, |_, _| r.gen_range(1..=12) as f64).unwrap()
}

fn betti_oracle(report: &mut Report) {
    let started = Instant::now();
    let (mut checked, mut mismatches) = (0usize, 0usize);
    for seed in 0..BETTI_CASES {
        let d = random_distances(10, seed);
        let f = build_rips(&d, &RipsConfig { max_dim: 3, threshold: 13.0, ..Default::default() }).unwrap();
        let b = compute_persistence(&f, false);
        for value in f.critical_values() {
            let brute = betti_numbers_bruteforce(&f, value).unwrap();
            for degree in 0..=2 {
                checked += 1;
                if brute[degree] != b.betti_at(degree, value) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    report.line(
        4,
        "barcode Betti numbers against dense ranks",
        mismatches == 0 && elapsed <= BETTI_BUDGET,
        format!(
            "{mismatches} mismatches in {checked} (case, value, degree) checks over {BETTI_CASES} matrices, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn random_barcode(seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng::stream(seed, 102);
    let count = r.gen_range(0..=8);
    (0..count)
        .map(|_| {
            // endpoints on a 1/64 grid keep areas exact
            let a = r.gen_range(0..256) as f64 / 64.0;
            (a, a + r.gen_range(1..128) as f64 / 64.0)
        })
        .collect()
}

fn tent(a: f64, b: f64, t: f64) -> f64 {
    (t - a).min(b - t).max(0.0)
}

/// Points where some level can bend: endpoints and crossings of rising and
/// falling sides, plus midpoints between consecutive ones.
fn probe_points(intervals: &[(f64, f64)]) -> Vec<f64> {
    let mut ts = Vec::new();
    for &(a, b) in intervals {
        ts.extend([a, b]);
        ts.extend(intervals.iter().map(|&(_, d)| 0.5 * (a + d)));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mids: Vec<f64> = ts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    ts.extend(mids);
    ts
}

fn landscape_axioms(report: &mut Report) {
    let started = Instant::now();
    let mut worst_oracle = 0.0f64;
    let mut worst_polarization = 0.0f64;
    let mut worst_triangle = f64::NEG_INFINITY;
    let (mut ordered, mut lipschitz, mut area) = (true, true, true);
    let build = |s: u64| -> (Vec<(f64, f64)>, PersistenceLandscape) {
        let iv = random_barcode(s);
        let l = landscape_from_intervals(1, &iv).unwrap();
        (iv, l)
    };
    for seed in 0..LANDSCAPE_CASES {
        let (iv, l) = build(seed);
        for t in probe_points(&iv) {
            let mut values: Vec<f64> = iv.iter().map(|&(a, b)| tent(a, b, t)).collect();
            values.sort_by(|x, y| y.total_cmp(x));
            for k in 1..=iv.len() + 1 {
                let expected = values.get(k - 1).copied().unwrap_or(0.0);
                worst_oracle = worst_oracle.max((evaluate(&l, k, t) - expected).abs());
                ordered &= evaluate(&l, k, t) >= evaluate(&l, k + 1, t);
            }
        }
        lipschitz &= l.levels.iter().all(|lv| lv.max_abs_slope() <= 1.0 + LANDSCAPE_ORACLE_TOL);
        let total: f64 = l.levels.iter().map(|lv| lv.integral()).sum();
        let expected: f64 = iv.iter().map(|&(a, b)| (b - a) * (b - a) / 4.0).sum();
        area &= total == expected;

        let (_, m) = build(seed + 10_000);
        let (_, n) = build(seed + 20_000);
        let norm2 = |a: &PersistenceLandscape, b: &PersistenceLandscape| landscape_distance(a, b, Norm::P(2.0)).unwrap();
        let zero = PersistenceLandscape::zero(1);
        let polarized = 0.5 * (norm2(&l, &zero).powi(2) + norm2(&m, &zero).powi(2) - norm2(&l, &m).powi(2));
        let kernel = landscape_kernel(&l, &m).unwrap();
        worst_polarization = worst_polarization.max((polarized - kernel).abs());
        for norm in [Norm::P(1.0), Norm::P(2.0), Norm::P(3.5), Norm::Infinity] {
            let d = |a: &PersistenceLandscape, b: &PersistenceLandscape| landscape_distance(a, b, norm).unwrap();
            worst_triangle = worst_triangle.max(d(&l, &n) - d(&l, &m) - d(&m, &n));
        }
    }
    let elapsed = started.elapsed();
    let pass = worst_oracle <= LANDSCAPE_ORACLE_TOL
        && ordered
        && lipschitz
        && area
        && worst_polarization <= LANDSCAPE_METRIC_TOL
        && worst_triangle <= LANDSCAPE_METRIC_TOL
        && elapsed <= LANDSCAPE_BUDGET;
    report.line(
        5,
        "landscape axioms",
        pass,
        format!(
            "{LANDSCAPE_CASES} barcodes: oracle err {worst_oracle:.1e} (<= {LANDSCAPE_ORACLE_TOL:.0e}), ordered {ordered}, 1-Lipschitz {lipschitz}, exact area {area}, polarization err {worst_polarization:.1e} and triangle excess {worst_triangle:.1e} (<= {LANDSCAPE_METRIC_TOL:.0e}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn square_fixture(report: &mut Report) {
    let pc = PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let f = build_rips(&euclidean_distances(&pc).unwrap(), &RipsConfig { max_dim: 2, threshold: 2.0, ..Default::default() })
        .unwrap();
    let b = compute_persistence(&f, true);
    let loops: Vec<_> = b.in_degree(1).collect();
    let root2 = 2f64.sqrt();
    let unit_edges = normalize_chain(&[(0, 1), (1, 2), (2, 3), (0, 3)]);
    let mut pass = loops.len() == 1 && loops[0].birth == 1.0 && loops[0].death == root2;
    let mut detail = format!("{} degree-1 intervals", loops.len());
    if pass {
        let seed = edges_of(loops[0].representative.as_ref().unwrap());
        let tight = tighten_cycle(&f, 0.5 * (1.0 + root2), &seed, 1000).unwrap();
        let no_early_triangles = f.simplices().iter().all(|s| s.dim() != 2 || s.value >= root2);
        pass = normalize_chain(&seed) == unit_edges
            && tight.edges.iter().copied().collect::<std::collections::BTreeSet<_>>() == unit_edges
            && no_early_triangles;
        detail = format!(
            "interval (1, sqrt 2), representative = four unit edges: {}, tightened unchanged: {}, no triangle below sqrt 2: {no_early_triangles}",
            normalize_chain(&seed) == unit_edges,
            tight.length == 4
        );
    }
    report.line(6, "square fixture", pass, detail);
}

fn isomap_exactness(report: &mut Report) {
    let (mut worst_abs, mut worst_mse) = (0.0f64, 0.0f64);
    let mut deterministic = true;
    for seed in 0..10u64 {
        let mut r = rng::stream(seed, 103);
        let n = 8 + seed as usize;
        let pc = PointCloud::new((0..n).map(|_| (0..3).map(|_| r.gen_range(-2.0..2.0)).collect()).collect()).unwrap();
        let d = euclidean_distances(&pc).unwrap();
        let e = isomap(&d, Neighborhood::Knn(n - 1), 3).unwrap();
        let (abs, mse) = embedding_error(&d, &e).unwrap();
        worst_abs = worst_abs.max(abs);
        worst_mse = worst_mse.max(mse);
        deterministic &= isomap(&d, Neighborhood::Knn(n - 1), 3).unwrap().coordinates == e.coordinates;
    }
    report.line(
        7,
        "Isomap recovers Euclidean R^3 configurations",
        worst_abs <= ISOMAP_MAX_ABS && worst_mse <= ISOMAP_MSE && deterministic,
        format!(
            "max abs err {worst_abs:.1e} (<= {ISOMAP_MAX_ABS:.0e}), mse {worst_mse:.1e} (<= {ISOMAP_MSE:.0e}), deterministic {deterministic}"
        ),
    );
}

fn cycle_certificates(report: &mut Report) {
    let started = Instant::now();
    let (mut loops, mut certified, mut idempotent) = (0usize, 0usize, 0usize);
    for seed in 0..CYCLE_CASES {
        let mut r = rng::stream(seed, 104);
        let pc = PointCloud::new((0..15).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect()).unwrap();
        let threshold = r.gen_range(0.6..1.6);
        let f = build_rips(&euclidean_distances(&pc).unwrap(), &RipsConfig { max_dim: 2, threshold, ..Default::default() })
            .unwrap();
        let b = compute_persistence(&f, true);
        for i in b.in_degree(1).filter(|i| i.is_finite()) {
            loops += 1;
            let value = 0.5 * (i.birth + i.death);
            let seed_edges = edges_of(i.representative.as_ref().unwrap());
            let tight = tighten_cycle(&f, value, &seed_edges, 1000).unwrap();
            if homologous_at(&f, value, &seed_edges, &tight.edges) {
                certified += 1;
            }
            if tighten_cycle(&f, value, &tight.edges, 1000).unwrap() == tight {
                idempotent += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    report.line(
        8,
        "cycle tightening certificate",
        loops > 0 && certified == loops && idempotent == loops && elapsed <= CYCLE_BUDGET,
        format!(
            "{CYCLE_CASES} complexes, {loops} loops: {certified} certified, {idempotent} idempotent, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

/// Correlation matrix of `series` (variables as rows).
fn correlation(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let standardized: Vec<Vec<f64>> = series
        .iter()
        .map(|x| {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            x.iter().map(|v| (v - mean) / sd).collect()
        })
        .collect();
    let t = series[0].len() as f64;
    standardized
        .iter()
        .enumerate()
        .map(|(i, a)| {
            standardized
                .iter()
                .enumerate()
                .map(|(j, b)| if i == j { 1.0 } else { a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / t })
                .collect()
        })
        .collect()
}

/// Four blocks of five variables driven by a shared factor each; the
/// shuffled version permutes each variable in time, keeping its marginal
/// distribution but destroying the block structure.
fn correlation_ensemble(seed: u64, shuffled: bool) -> Vec<Vec<f64>> {
    const BLOCKS: usize = 4;
    const PER_BLOCK: usize = 5;
    const STEPS: usize = 200;
    let mut r = rng::stream(seed, 105);
    let mut normal = || -> f64 {
        // Box-Muller
        let (u, v): (f64, f64) = (r.gen_range(f64::EPSILON..1.0), r.gen());
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let factors: Vec<Vec<f64>> = (0..BLOCKS).map(|_| (0..STEPS).map(|_| normal()).collect()).collect();
    let mut series: Vec<Vec<f64>> = Vec::new();
    for factor in &factors {
        for _ in 0..PER_BLOCK {
            series.push(factor.iter().map(|f| 0.8 * f + 0.6 * normal()).collect());
        }
    }
    if shuffled {
        let mut r = rng::stream(seed, 106);
        for x in &mut series {
            x.shuffle(&mut r);
        }
    }
    correlation(&series)
}

fn matrix_csv(m: &[Vec<f64>]) -> String {
    m.iter()
        .map(|row| row.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

fn correlation_substitute(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let mut groups = Vec::new();
    for (g, (name, shuffled)) in [("blocks", false), ("shuffled", true)].into_iter().enumerate() {
        let mut paths = Vec::new();
        for i in 0..7u64 {
            let path = dir.path().join(format!("{name}-{i}.csv"));
            fs::write(&path, matrix_csv(&correlation_ensemble(100 * g as u64 + i, shuffled))).unwrap();
            paths.push(path);
        }
        groups.push(GroupConfig {
            name: name.into(),
            source: GroupSource::Matrices {
                kind: MatrixKind::Correlation,
                paths,
            },
        });
    }
    let mut config = RunConfig {
        groups,
        ..RunConfig::default()
    };
    config.output.plots = false;
    config.test.degrees = vec![0];
    config.landscape.degrees = vec![0];
    config.pca.degree = 0;
    config.embedding.enabled = false;
    let out = dir.path().join("run");
    let summary = run_pipeline(&config, &out, None).expect("pipeline runs");
    let t = &summary.tests[0].1;

    let integrals = fs::read_to_string(out.join("integrals/degree0.csv")).unwrap();
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in integrals.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        by_group
            .entry(cells[1].to_owned())
            .or_default()
            .push(plstat_core::data::parse_f64(cells[2]).unwrap());
    }
    let stats = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
    };
    let (m1, v1) = stats(&by_group["blocks"]);
    let (m2, v2) = stats(&by_group["shuffled"]);
    let cohen_d = (m1 - m2).abs() / (0.5 * (v1 + v2)).sqrt();
    report.line(
        9,
        "correlation-matrix substitute (block vs shuffled, 7v7)",
        t.m == 1716 && t.p_value == 1.0 / 1716.0 && cohen_d >= CORRELATION_EFFECT_SIZE,
        format!(
            "degree-0 p = {} (1/1716 = {}), Cohen's d = {cohen_d:.2} (>= {CORRELATION_EFFECT_SIZE})",
            format_f64(t.p_value),
            format_f64(1.0 / 1716.0)
        ),
    );
}

/// Relative path to contents, with the manifest's runtime section removed.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&path).unwrap();
            if name == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("runtime");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(name, bytes);
        }
    }
    out
}

fn determinism(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/disk_annulus.toml");
    let mut ok = true;
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let status = Command::new(env!("CARGO_BIN_EXE_plstat"))
            .arg("pipeline")
            .arg("--config")
            .arg(&config)
            .args(["--out", out, "--threads", threads])
            .current_dir(dir.path())
            .output()
            .unwrap();
        ok &= status.status.success();
    }
    let a = tree(&dir.path().join("a"));
    let b = tree(&dir.path().join("b"));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    report.line(
        10,
        "pipeline determinism",
        ok && !a.is_empty() && a.len() == b.len() && differing.is_empty(),
        format!(
            "{} files, {} differ between runs with 1 and 3 threads (manifest runtime excluded)",
            a.len(),
            differing.len()
        ),
    );
}

fn main() {
    let mut report = Report { failed: 0 };
    disk_annulus(&mut report);
    permutation_counts(&mut report);
    betti_oracle(&mut report);
    landscape_axioms(&mut report);
    square_fixture(&mut report);
    isomap_exactness(&mut report);
    cycle_certificates(&mut report);
    correlation_substitute(&mut report);
    determinism(&mut report);
    if report.failed > 0 {
        println!("{} criteria failed", report.failed);
        std::process::exit(1);
    }
}
