//! TOML run configuration.

use std::path::{Path, PathBuf};

use ripplecache_core::adaptation::AdaptationParams;
use ripplecache_core::baselines::{ProbCacheParams, DEFAULT_T_TW};
use ripplecache_core::catalog::{Catalog, CatalogError, Workload};
use ripplecache_core::classic::{ClassicParams, DEFAULT_BUDGET};
use ripplecache_core::experiment::{ExperimentParams, PolicyKind};
use ripplecache_core::finder::DEFAULT_MAX_ITERS;
use ripplecache_core::reward::MIN_DELAY_SAMPLES;
use ripplecache_core::sim::SimConfig;
use ripplecache_core::topology::{desk16_topology, generate_ba_topology, BaParams, Topology, TopologyError};
use serde::{Deserialize, Serialize};

use crate::topofile::{read_topology_file, TopologyFileError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    TopologyFile(#[from] TopologyFileError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunSection,
    pub topology: TopologySection,
    pub catalog: CatalogSection,
    pub workload: WorkloadSection,
    pub cache: CacheSection,
    pub adaptation: AdaptationSection,
    pub network: NetworkSection,
    pub solver: SolverSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Label written to every results row.
    pub profile: String,
    pub seeds: Vec<u64>,
    pub warmup_fraction: f64,
    /// Seconds after the horizon before running sessions are cut.
    pub drain: f64,
    /// Keep a per-router lookup log for each run.
    pub record_hits: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            profile: "bip-tractable".into(),
            seeds: (1..=10).collect(),
            warmup_fraction: 1.0 / 3.0,
            drain: 600.0,
            record_hits: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    /// The fixed 16-node tree.
    Tree16,
    /// Seeded preferential-attachment graph.
    Ba,
    /// Topology text file.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub kind: TopologyKind,
    /// Node count for generated graphs, producers included.
    pub routers: usize,
    pub producers: Option<usize>,
    pub edge_routers: Option<usize>,
    pub seed: u64,
    /// For `kind = "file"`; relative paths resolve against the config file.
    pub file: Option<PathBuf>,
    pub bandwidth_mbps: f64,
    pub delay_ms: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            kind: TopologyKind::Tree16,
            routers: 16,
            producers: None,
            edge_routers: None,
            seed: 1,
            file: None,
            bandwidth_mbps: 20.0,
            delay_ms: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogSection {
    pub files: u32,
    pub segments: u32,
    pub bitrates_mbps: Vec<f64>,
    /// Seconds of media per segment; also the delivery deadline.
    pub segment_duration: f64,
}

impl Default for CatalogSection {
    fn default() -> Self {
        CatalogSection { files: 25, segments: 25, bitrates_mbps: vec![1.0, 2.5, 5.0, 8.0], segment_duration: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub consumers: u32,
    /// Mean seconds between session starts of one consumer.
    pub mean_interval: f64,
    pub horizon: f64,
    pub alpha: f64,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection { consumers: 32, mean_interval: 300.0, horizon: 3000.0, alpha: 1.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSection {
    pub policies: Vec<String>,
    pub omega: f64,
    pub probcache_t_tw: f64,
}

impl Default for CacheSection {
    fn default() -> Self {
        CacheSection {
            policies: PolicyKind::ALL.iter().map(|p| p.as_str().to_owned()).collect(),
            omega: 0.2,
            probcache_t_tw: DEFAULT_T_TW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptationSection {
    pub drop_threshold: f64,
    pub combine_weight: f64,
    pub window: usize,
    pub upshift_patience: u32,
    pub buffer_target: f64,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        let p = AdaptationParams::default();
        AdaptationSection {
            drop_threshold: p.drop_threshold,
            combine_weight: p.combine_weight,
            window: p.window,
            upshift_patience: p.upshift_patience,
            buffer_target: p.buffer_target,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub access_bandwidth_mbps: f64,
    pub access_delay_ms: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { access_bandwidth_mbps: 20.0, access_delay_ms: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eta: f64,
    pub budget: u64,
    pub classic_max_iters: usize,
    pub tolerance: f64,
    pub min_samples: u64,
    pub finder_iters: usize,
    pub finder_rounds: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            eta: 1.0,
            budget: DEFAULT_BUDGET,
            classic_max_iters: 10,
            tolerance: 0.01,
            min_samples: MIN_DELAY_SAMPLES,
            finder_iters: DEFAULT_MAX_ITERS,
            finder_rounds: 4,
        }
    }
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: [&str; 6] = ["omega", "alpha", "eta", "consumers", "horizon", "mean_interval"];

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; a relative topology file resolves against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Config::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (&cfg.topology.file, path.parent()) {
            if f.is_relative() {
                cfg.topology.file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if self.run.seeds.is_empty() {
            return bad("run.seeds must not be empty");
        }
        if !(self.cache.omega > 0.0 && self.cache.omega <= 1.0) {
            return bad("cache.omega must be in (0, 1]");
        }
        if !(self.workload.alpha >= 0.0) {
            return bad("workload.alpha must be non-negative");
        }
        if !(self.workload.mean_interval > 0.0) || !(self.workload.horizon >= 0.0) {
            return bad("workload.mean_interval must be positive and workload.horizon non-negative");
        }
        if self.workload.consumers == 0 {
            return bad("workload.consumers must be positive");
        }
        if !(self.solver.eta >= 0.0) {
            return bad("solver.eta must be non-negative");
        }
        if !(self.topology.bandwidth_mbps > 0.0) || !(self.network.access_bandwidth_mbps > 0.0) {
            return bad("bandwidths must be positive");
        }
        if !(self.topology.delay_ms >= 0.0) || !(self.network.access_delay_ms >= 0.0) {
            return bad("delays must be non-negative");
        }
        if self.topology.kind == TopologyKind::File && self.topology.file.is_none() {
            return bad("topology.file is required for kind = \"file\"");
        }
        self.policies()?;
        self.adaptation_params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.catalog()?;
        Ok(())
    }

    pub fn policies(&self) -> Result<Vec<PolicyKind>, ConfigError> {
        if self.cache.policies.is_empty() {
            return Err(ConfigError::Invalid("cache.policies must not be empty".into()));
        }
        self.cache
            .policies
            .iter()
            .map(|p| p.parse().map_err(|e| ConfigError::Invalid(format!("cache.policies: {e}"))))
            .collect()
    }

    pub fn catalog(&self) -> Result<Catalog, ConfigError> {
        let c = &self.catalog;
        let ladder = c.bitrates_mbps.iter().map(|b| b * 1e6).collect();
        Ok(Catalog::new(c.files, c.segments, ladder, c.segment_duration)?)
    }

    pub fn adaptation_params(&self) -> AdaptationParams {
        let a = &self.adaptation;
        AdaptationParams {
            drop_threshold: a.drop_threshold,
            combine_weight: a.combine_weight,
            window: a.window,
            upshift_patience: a.upshift_patience,
            buffer_target: a.buffer_target,
        }
    }

    pub fn topology(&self) -> Result<Topology, ConfigError> {
        let t = &self.topology;
        let bw = t.bandwidth_mbps * 1e6;
        let delay = t.delay_ms * 1e-3;
        Ok(match t.kind {
            TopologyKind::Tree16 => desk16_topology(bw, delay),
            TopologyKind::Ba => {
                let mut p = BaParams::for_routers(t.routers);
                p.bandwidth = bw;
                p.delay = delay;
                if let Some(n) = t.producers {
                    p.producers = n;
                }
                if let Some(n) = t.edge_routers {
                    p.edge_routers = n;
                }
                generate_ba_topology(&p, t.seed)?
            }
            TopologyKind::File => read_topology_file(t.file.as_deref().expect("checked by validate"))?,
        })
    }

    /// Experiment parameters for one policy and seed.
    pub fn params(&self, policy: PolicyKind, seed: u64) -> Result<ExperimentParams, ConfigError> {
        let w = &self.workload;
        let workload = Workload { mean_interval: w.mean_interval, horizon: w.horizon, alpha: w.alpha };
        let mut p = ExperimentParams::new(self.catalog()?, workload, w.consumers, policy);
        let s = &self.solver;
        p.omega = self.cache.omega;
        p.eta = s.eta;
        p.seed = seed;
        p.warmup_fraction = self.run.warmup_fraction;
        p.drain = self.run.drain;
        p.sim = SimConfig {
            adaptation: self.adaptation_params(),
            access_bandwidth: self.network.access_bandwidth_mbps * 1e6,
            access_delay: self.network.access_delay_ms * 1e-3,
            record_hits: self.run.record_hits,
            ..SimConfig::default()
        };
        p.classic = ClassicParams {
            eta: s.eta,
            budget: s.budget,
            max_iters: s.classic_max_iters,
            tolerance: s.tolerance,
            deadline: self.catalog.segment_duration,
            min_samples: s.min_samples,
        };
        p.finder_iters = s.finder_iters;
        p.finder_rounds = s.finder_rounds;
        p.probcache = ProbCacheParams { t_tw: self.cache.probcache_t_tw };
        Ok(p)
    }

    /// Sets one sweepable parameter by name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        match name {
            "omega" => self.cache.omega = value,
            "alpha" => self.workload.alpha = value,
            "eta" => self.solver.eta = value,
            "horizon" => self.workload.horizon = value,
            "mean_interval" => self.workload.mean_interval = value,
            "consumers" => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(ConfigError::Invalid(format!("consumers must be a positive integer, got {value}")));
                }
                self.workload.consumers = value as u32;
            }
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "unknown sweep parameter `{name}` (expected one of {})",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        self.validate()
    }
}
