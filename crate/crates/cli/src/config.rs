//! Run configuration: a TOML file with one section per stage.
//!
//! Every field has a default, so an empty file is a valid (if useless)
//! configuration. `RunConfig::default()` is the bundled disk/annulus run.

use std::path::{Path, PathBuf};

use plstat_core::data::MatrixKind;
use plstat_core::embedding::{Neighborhood, DEFAULT_K_SMALL};
use plstat_core::inference::{DEFAULT_EXHAUSTIVE_LIMIT, DEFAULT_MONTE_CARLO_SAMPLES};
use plstat_core::rips::{DEFAULT_CAPACITY, DEFAULT_MAX_DIM, DEFAULT_THRESHOLD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const STAGE: &str = "config";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output: OutputConfig,
    #[serde(rename = "group")]
    pub groups: Vec<GroupConfig>,
    pub rips: RipsSection,
    pub landscape: LandscapeSection,
    pub test: TestSection,
    pub pca: PcaSection,
    pub embedding: EmbeddingSection,
    pub cycle: CycleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Used when `--out` is not given.
    pub dir: Option<PathBuf>,
    /// Filtration CSVs are large; off by default.
    pub write_filtrations: bool,
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: GroupSource,
}

/// Where a group's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum GroupSource {
    Disk {
        count: usize,
        points: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    Annulus {
        count: usize,
        points: usize,
        #[serde(default = "half")]
        inner: f64,
        #[serde(default = "one")]
        outer: f64,
    },
    /// Square matrix CSVs; correlations go through `1 - |C|`.
    Matrices { kind: MatrixKind, paths: Vec<PathBuf> },
    /// Point-cloud CSVs, one point per row.
    Points { paths: Vec<PathBuf> },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl GroupSource {
    pub fn count(&self) -> usize {
        match self {
            GroupSource::Disk { count, .. } | GroupSource::Annulus { count, .. } => *count,
            GroupSource::Matrices { paths, .. } | GroupSource::Points { paths } => paths.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RipsSection {
    pub max_dim: usize,
    pub threshold: f64,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    pub degrees: Vec<usize>,
    /// Replacement for infinite deaths; defaults to the Rips threshold.
    pub infinite_cap: Option<f64>,
    pub grid_min: f64,
    /// Defaults to the infinite cap.
    pub grid_max: Option<f64>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub degrees: Vec<usize>,
    pub exhaustive_limit: u64,
    pub monte_carlo_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaSection {
    pub enabled: bool,
    pub degree: usize,
    pub standardize: bool,
    /// Leading components used for the separability check.
    pub components: usize,
    /// Landscape levels in the feature vectors; 0 means all.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub enabled: bool,
    pub degree: usize,
    /// Exponent of the landscape distance; `inf` is not accepted here.
    pub p: f64,
    /// Neighbors per point; ignored when `epsilon` is set.
    pub k: usize,
    pub epsilon: Option<f64>,
    pub target_dim: usize,
    /// Raise `k` until the neighbor graph is connected instead of failing.
    pub connect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleSection {
    pub enabled: bool,
    /// Sample names to process; empty means every sample.
    pub samples: Vec<String>,
    pub max_rounds: usize,
    /// Vertices whose hop distance to the loop is reported.
    pub marked: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2014,
            output: OutputConfig::default(),
            groups: vec![
                GroupConfig {
                    name: "disk".into(),
                    source: GroupSource::Disk {
                        count: 10,
                        points: 150,
                        radius: 1.0,
                    },
                },
                GroupConfig {
                    name: "annulus".into(),
                    source: GroupSource::Annulus {
                        count: 10,
                        points: 150,
                        inner: 0.5,
                        outer: 1.0,
                    },
                },
            ],
            rips: RipsSection::default(),
            landscape: LandscapeSection::default(),
            test: TestSection::default(),
            pca: PcaSection::default(),
            embedding: EmbeddingSection::default(),
            cycle: CycleSection::default(),
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            write_filtrations: false,
            plots: true,
        }
    }
}

impl Default for RipsSection {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            threshold: DEFAULT_THRESHOLD,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            degrees: vec![0, 1],
            infinite_cap: None,
            grid_min: 0.0,
            grid_max: None,
            grid_points: 50,
        }
    }
}

impl Default for TestSection {
    fn default() -> Self {
        Self {
            degrees: vec![0, 1],
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            monte_carlo_samples: DEFAULT_MONTE_CARLO_SAMPLES,
        }
    }
}

impl Default for PcaSection {
    fn default() -> Self {
        Self {
            enabled: true,
            degree: 1,
            standardize: false,
            components: 2,
            levels: 0,
        }
    }
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            enabled: true,
            degree: 1,
            p: 2.0,
            k: DEFAULT_K_SMALL,
            epsilon: None,
            target_dim: 2,
            connect: true,
        }
    }
}

impl Default for CycleSection {
    fn default() -> Self {
        Self {
            enabled: false,
            samples: Vec::new(),
            max_rounds: 1000,
            marked: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative input paths are taken relative to it.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(STAGE, format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for g in &mut config.groups {
            if let GroupSource::Matrices { paths, .. } | GroupSource::Points { paths } = &mut g.source {
                for p in paths.iter_mut() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::user(STAGE, e.to_string().replace('\n', " ")))
    }

    /// The configuration with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// `sha256:<hex>` of [`RunConfig::to_toml`].
    pub fn hash(&self) -> String {
        format!("sha256:{}", hex::encode(Sha256::digest(self.to_toml().as_bytes())))
    }

    pub fn infinite_cap(&self) -> f64 {
        self.landscape.infinite_cap.unwrap_or(self.rips.threshold)
    }

    pub fn grid_max(&self) -> f64 {
        self.landscape.grid_max.unwrap_or_else(|| self.infinite_cap())
    }

    pub fn neighborhood(&self) -> Neighborhood {
        match self.embedding.epsilon {
            Some(e) => Neighborhood::Epsilon(e),
            None => Neighborhood::Knn(self.embedding.k),
        }
    }

    /// Every degree any stage needs a landscape for.
    pub fn landscape_degrees(&self) -> Vec<usize> {
        let mut ds = self.landscape.degrees.clone();
        ds.extend(&self.test.degrees);
        if self.pca.enabled {
            ds.push(self.pca.degree);
        }
        if self.embedding.enabled {
            ds.push(self.embedding.degree);
        }
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::user(STAGE, msg));
        if self.groups.is_empty() {
            return bad("at least one [[group]] is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for g in &self.groups {
            if g.name.is_empty() || !g.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("group name {:?} must be non-empty ASCII letters, digits, '-' or '_'", g.name));
            }
            if !names.insert(&g.name) {
                return bad(format!("duplicate group name {:?}", g.name));
            }
            if g.source.count() == 0 {
                return bad(format!("group {:?} has no samples", g.name));
            }
            match &g.source {
                GroupSource::Disk { points, radius, .. } => {
                    if *points == 0 || !(*radius > 0.0 && radius.is_finite()) {
                        return bad(format!("group {:?}: need points >= 1 and radius > 0", g.name));
                    }
                }
                GroupSource::Annulus { points, inner, outer, .. } => {
                    if *points == 0 || !(0.0 <= *inner && inner < outer && outer.is_finite()) {
                        return bad(format!("group {:?}: need points >= 1 and 0 <= inner < outer", g.name));
                    }
                }
                GroupSource::Matrices { paths, .. } | GroupSource::Points { paths } => {
                    if let Some(p) = paths.iter().find(|p| !p.is_file()) {
                        return bad(format!("group {:?}: input {} does not exist", g.name, p.display()));
                    }
                }
            }
        }
        let r = &self.rips;
        if !(r.threshold > 0.0 && r.threshold.is_finite()) {
            return bad(format!("rips.threshold must be positive and finite, got {}", r.threshold));
        }
        if !(1..=7).contains(&r.max_dim) {
            return bad(format!("rips.max_dim must be in 1..=7, got {}", r.max_dim));
        }
        if let Some(&d) = self.landscape_degrees().iter().find(|&&d| d >= r.max_dim) {
            return bad(format!(
                "degree {d} needs rips.max_dim >= {} (classes of degree d die on (d+1)-simplices)",
                d + 1
            ));
        }
        let cap = self.infinite_cap();
        if !(cap > 0.0 && cap.is_finite()) {
            return bad(format!("landscape.infinite_cap must be positive and finite, got {cap}"));
        }
        if self.landscape.grid_points < 2 || !(self.landscape.grid_min < self.grid_max()) {
            return bad("landscape grid needs grid_points >= 2 and grid_min < grid_max".into());
        }
        if !self.test.degrees.is_empty() {
            if self.groups.len() != 2 {
                return bad(format!("the permutation test needs exactly 2 groups, got {}", self.groups.len()));
            }
            if self.groups.iter().any(|g| g.source.count() < 2) {
                return bad("the permutation test needs at least 2 samples per group".into());
            }
        }
        if self.pca.enabled && self.pca.components == 0 {
            return bad("pca.components must be at least 1".into());
        }
        let e = &self.embedding;
        if e.enabled {
            if !(e.p >= 1.0 && e.p.is_finite()) {
                return bad(format!("embedding.p must be finite and >= 1, got {}", e.p));
            }
            if e.target_dim == 0 || e.k == 0 {
                return bad("embedding.k and embedding.target_dim must be at least 1".into());
            }
            if matches!(e.epsilon, Some(x) if !(x > 0.0 && x.is_finite())) {
                return bad("embedding.epsilon must be positive".into());
            }
        }
        if self.cycle.enabled && r.max_dim < 2 {
            return bad("cycle tightening needs rips.max_dim >= 2".into());
        }
        Ok(())
    }
}
