//! Simulation configuration and the TOML scenario file that produces it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{ConceptTree, SubjectCatalog, TaxonomyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Taxonomy {
        path: PathBuf,
        #[source]
        source: TaxonomyError,
    },
}

impl ConfigError {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Self::Invalid {
            field,
            message: message.into(),
        }
    }
}

/// Length of each protocol phase, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseDurations {
    pub discover: u64,
    pub density_exchange: u64,
    pub elect: u64,
    pub converge: u64,
    pub sub_cluster: u64,
    pub steady: u64,
}

impl Default for PhaseDurations {
    fn default() -> Self {
        Self {
            discover: 20,
            density_exchange: 20,
            elect: 20,
            converge: 120,
            sub_cluster: 60,
            steady: 240,
        }
    }
}

impl PhaseDurations {
    pub fn total(&self) -> u64 {
        self.discover
            + self.density_exchange
            + self.elect
            + self.converge
            + self.sub_cluster
            + self.steady
    }
}

/// A node pinned to a position and subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub subject: String,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub population: u32,
    pub hall_width: f64,
    pub hall_height: f64,
    pub radio_range: f64,
    /// Meters per second.
    pub walk_speed: f64,
    pub arrival_radius: f64,
    pub tick_seconds: f64,
    pub ttl: u32,
    pub phases: PhaseDurations,
    pub alpha: f64,
    pub beta: f64,
    pub quorum_threshold: Option<f64>,
    /// Ticks between cluster point density refreshes.
    pub refresh_interval: u64,
    pub seed: u64,
    /// Exact node counts for some subjects.
    pub subject_counts: BTreeMap<String, u32>,
    /// Random assignment weights for the nodes not covered by counts or
    /// placements. Empty means uniform over the subjects without counts.
    pub subject_weights: BTreeMap<String, f64>,
    pub placements: Vec<Placement>,
    pub trace: bool,
    pub taxonomy: Arc<ConceptTree>,
    pub catalog: Arc<SubjectCatalog>,
}

impl SimConfig {
    pub fn new(taxonomy: Arc<ConceptTree>, catalog: Arc<SubjectCatalog>) -> Self {
        Self {
            population: 300,
            hall_width: 50.0,
            hall_height: 50.0,
            radio_range: 10.0,
            walk_speed: 1.0,
            arrival_radius: 2.0,
            tick_seconds: 1.0,
            ttl: 16,
            phases: PhaseDurations::default(),
            alpha: 0.5,
            beta: 0.5,
            quorum_threshold: None,
            refresh_interval: 30,
            seed: 0,
            subject_counts: BTreeMap::new(),
            subject_weights: BTreeMap::new(),
            placements: Vec::new(),
            trace: false,
            taxonomy,
            catalog,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(
                    field,
                    format!("must be positive, got {v}"),
                ))
            }
        };
        if self.population == 0 {
            return Err(ConfigError::invalid("population", "must be positive"));
        }
        positive("hall_width", self.hall_width)?;
        positive("hall_height", self.hall_height)?;
        positive("radio_range", self.radio_range)?;
        positive("walk_speed", self.walk_speed)?;
        positive("arrival_radius", self.arrival_radius)?;
        positive("tick_seconds", self.tick_seconds)?;
        if self.arrival_radius >= self.radio_range {
            return Err(ConfigError::invalid(
                "arrival_radius",
                format!(
                    "must be smaller than radio_range ({} >= {})",
                    self.arrival_radius, self.radio_range
                ),
            ));
        }
        if self.ttl == 0 {
            return Err(ConfigError::invalid("ttl", "must be positive"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && ((self.alpha + self.beta) - 1.0).abs() < 1e-9)
        {
            return Err(ConfigError::invalid(
                "alpha",
                "alpha and beta must be non-negative and sum to 1",
            ));
        }
        if let Some(t) = self.quorum_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(ConfigError::invalid(
                    "quorum_threshold",
                    "must lie in [0, 1]",
                ));
            }
        }
        if self.refresh_interval == 0 {
            return Err(ConfigError::invalid("refresh_interval", "must be positive"));
        }
        // a request needs ttl + 1 hops out and one hop back for its replies
        let flood = u64::from(self.ttl) + 2;
        let p = &self.phases;
        if p.discover < flood {
            return Err(ConfigError::invalid(
                "phases.discover",
                format!("must be at least ttl + 2 = {flood} ticks"),
            ));
        }
        for (field, v) in [
            ("phases.density_exchange", p.density_exchange),
            ("phases.elect", p.elect),
            ("phases.converge", p.converge),
            ("phases.steady", p.steady),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(field, "must be positive"));
            }
        }
        if p.sub_cluster / 3 < flood {
            return Err(ConfigError::invalid(
                "phases.sub_cluster",
                format!("must be at least 3 * (ttl + 2) = {} ticks", 3 * flood),
            ));
        }
        if self.catalog.is_empty() {
            return Err(ConfigError::invalid("catalog", "no subjects declared"));
        }
        if self.placements.len() > self.population as usize {
            return Err(ConfigError::invalid(
                "nodes",
                "more placed nodes than the population",
            ));
        }
        for p in &self.placements {
            if !(0.0..=self.hall_width).contains(&p.x) || !(0.0..=self.hall_height).contains(&p.y) {
                return Err(ConfigError::invalid(
                    "nodes",
                    format!("node at ({}, {}) lies outside the hall", p.x, p.y),
                ));
            }
            if self.catalog.subject(&p.subject).is_none() {
                return Err(ConfigError::invalid(
                    "nodes",
                    format!("unknown subject `{}`", p.subject),
                ));
            }
        }
        let mut counted = 0u64;
        for (s, &n) in &self.subject_counts {
            if self.catalog.subject(s).is_none() {
                return Err(ConfigError::invalid(
                    "subjects.counts",
                    format!("unknown subject `{s}`"),
                ));
            }
            counted += u64::from(n);
        }
        let free = u64::from(self.population) - self.placements.len() as u64;
        if counted > free {
            return Err(ConfigError::invalid(
                "subjects.counts",
                format!("counts sum to {counted} but only {free} nodes are unplaced"),
            ));
        }
        for (s, &w) in &self.subject_weights {
            if self.catalog.subject(s).is_none() {
                return Err(ConfigError::invalid(
                    "subjects.weights",
                    format!("unknown subject `{s}`"),
                ));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(ConfigError::invalid(
                    "subjects.weights",
                    format!("weight for `{s}` must be non-negative"),
                ));
            }
        }
        if !self.subject_weights.is_empty() && self.subject_weights.values().sum::<f64>() <= 0.0 {
            return Err(ConfigError::invalid(
                "subjects.weights",
                "all weights are zero",
            ));
        }
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.phases;
        [
            ("population", self.population.to_string()),
            ("hall_width", self.hall_width.to_string()),
            ("hall_height", self.hall_height.to_string()),
            ("radio_range", self.radio_range.to_string()),
            ("walk_speed", self.walk_speed.to_string()),
            ("arrival_radius", self.arrival_radius.to_string()),
            ("tick_seconds", self.tick_seconds.to_string()),
            ("ttl", self.ttl.to_string()),
            (
                "phases",
                format!(
                    "{}/{}/{}/{}/{}/{}",
                    p.discover, p.density_exchange, p.elect, p.converge, p.sub_cluster, p.steady
                ),
            ),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            (
                "quorum_threshold",
                self.quorum_threshold
                    .map_or_else(|| "off".to_string(), |t| t.to_string()),
            ),
            ("refresh_interval", self.refresh_interval.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubjectAssignment {
    pub counts: BTreeMap<String, u32>,
    pub weights: BTreeMap<String, f64>,
}

/// On-disk scenario. Missing fields take the [`SimConfig`] defaults; file
/// references are resolved against the scenario's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub taxonomy: PathBuf,
    pub catalog: PathBuf,
    pub population: Option<u32>,
    pub seed: Option<u64>,
    pub hall_width: Option<f64>,
    pub hall_height: Option<f64>,
    pub radio_range: Option<f64>,
    pub walk_speed: Option<f64>,
    pub arrival_radius: Option<f64>,
    pub tick_seconds: Option<f64>,
    pub ttl: Option<u32>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub quorum_threshold: Option<f64>,
    pub refresh_interval: Option<u64>,
    #[serde(default)]
    pub trace: bool,
    pub phases: Option<PhaseDurations>,
    #[serde(default)]
    pub subjects: SubjectAssignment,
    #[serde(default, rename = "node")]
    pub nodes: Vec<Placement>,
}

impl ScenarioFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Loads the referenced taxonomy and catalog and applies defaults.
    pub fn resolve(&self, base_dir: &Path) -> Result<SimConfig, ConfigError> {
        let (taxonomy, catalog) = load_taxonomy_and_catalog(
            &base_dir.join(&self.taxonomy),
            &base_dir.join(&self.catalog),
        )?;
        let mut c = SimConfig::new(Arc::new(taxonomy), Arc::new(catalog));
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            population,
            seed,
            hall_width,
            hall_height,
            radio_range,
            walk_speed,
            arrival_radius,
            tick_seconds,
            ttl,
            alpha,
            beta,
            refresh_interval,
            phases
        );
        c.quorum_threshold = self.quorum_threshold;
        c.trace = self.trace;
        c.subject_counts = self.subjects.counts.clone();
        c.subject_weights = self.subjects.weights.clone();
        c.placements = self.nodes.clone();
        c.validate()?;
        Ok(c)
    }
}

pub fn load_taxonomy_and_catalog(
    taxonomy: &Path,
    catalog: &Path,
) -> Result<(ConceptTree, SubjectCatalog), ConfigError> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let tree = ConceptTree::parse(&read(taxonomy)?).map_err(|source| ConfigError::Taxonomy {
        path: taxonomy.to_path_buf(),
        source,
    })?;
    let cat =
        SubjectCatalog::parse(&tree, &read(catalog)?).map_err(|source| ConfigError::Taxonomy {
            path: catalog.to_path_buf(),
            source,
        })?;
    Ok((tree, cat))
}

/// Reads and resolves a scenario file.
pub fn load_scenario(path: &Path) -> Result<SimConfig, ConfigError> {
    let file = ScenarioFile::read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.resolve(base)
}
