//! Run configuration: JSON schema, defaults and named seed sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{BackendConfig, MockConfig};
use crate::experiment::{Scenario, ScenarioKind};
use crate::feed::{FeedConfig, MixRatios};
use crate::rng;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One seed per independent source of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub population: u64,
    pub schedule: u64,
    pub treatment: u64,
    pub mock: u64,
    pub creators: u64,
}

impl Default for SeedSet {
    fn default() -> Self {
        SeedSet::derive("default")
    }
}

impl SeedSet {
    /// Deterministic seeds for a named set, one per stream.
    pub fn derive(name: &str) -> Self {
        let base = rng::label_key(name);
        let stream = |s: &str| rng::mix(base, &[rng::label_key(s)]);
        SeedSet {
            population: stream("population"),
            schedule: stream("schedule"),
            treatment: stream("treatment"),
            mock: stream("mock"),
            creators: stream("creators"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of agents; `None` uses every node of the follow graph.
    pub population_size: Option<usize>,
    pub census_path: Option<PathBuf>,
    pub graph_path: Option<PathBuf>,
    /// A prebuilt `population.json`; overrides the census and graph inputs.
    pub population_path: Option<PathBuf>,
    pub warmup_rounds: u32,
    pub treatment_periods: u32,
    pub feed_size: usize,
    pub mix_ratios: MixRatios,
    pub content_creation_fraction: f64,
    pub perturbation_max: u32,
    pub initial_login_max: u32,
    pub bootstrap_candidates: usize,
    pub stance_via_backend: bool,
    pub scenario: ScenarioKind,
    pub phase_fractions: [f64; 3],
    pub block_length: u32,
    pub backend: BackendConfig,
    pub mock: MockConfig,
    /// Name of the seed set in use; runs sharing it form one comparison.
    pub seed_set: String,
    pub seeds: SeedSet,
    /// Named seed sets selectable with `--seed-set`.
    pub seed_sets: BTreeMap<String, SeedSet>,
    /// Write a state checkpoint every this many rounds (0 disables).
    pub checkpoint_every: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = Scenario::default();
        RunConfig {
            population_size: None,
            census_path: None,
            graph_path: None,
            population_path: None,
            warmup_rounds: 15,
            treatment_periods: scenario.periods,
            feed_size: 5,
            mix_ratios: MixRatios::default(),
            content_creation_fraction: 0.10,
            perturbation_max: 2,
            initial_login_max: 6,
            bootstrap_candidates: 20,
            stance_via_backend: false,
            scenario: scenario.kind,
            phase_fractions: scenario.phase_fractions,
            block_length: scenario.block_length,
            backend: BackendConfig::default(),
            mock: MockConfig::default(),
            seed_set: "default".into(),
            seeds: SeedSet::default(),
            seed_sets: BTreeMap::new(),
            checkpoint_every: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Loads a config file; relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_json(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.census_path, &mut cfg.graph_path, &mut cfg.population_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Selects a seed set: a configured one by that name, or one derived
    /// from the name.
    pub fn select_seed_set(&mut self, name: &str) {
        self.seeds = self.seed_sets.get(name).copied().unwrap_or_else(|| SeedSet::derive(name));
        self.seed_set = name.to_string();
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            kind: self.scenario,
            phase_fractions: self.phase_fractions,
            block_length: self.block_length,
            periods: self.treatment_periods,
        }
    }

    pub fn feed_config(&self) -> FeedConfig {
        FeedConfig { feed_size: self.feed_size, ratios: self.mix_ratios }
    }

    pub fn total_rounds(&self) -> u32 {
        self.warmup_rounds + self.treatment_periods
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.population_path.is_none() && (self.census_path.is_none() || self.graph_path.is_none()) {
            return bad("either population_path or both census_path and graph_path are required".into());
        }
        if self.population_size == Some(0) {
            return bad("population_size must be positive".into());
        }
        if self.treatment_periods == 0 || self.feed_size == 0 {
            return bad("treatment_periods and feed_size must be positive".into());
        }
        if self.bootstrap_candidates == 0 {
            return bad("bootstrap_candidates must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.content_creation_fraction) {
            return bad(format!("content_creation_fraction {} outside [0,1]", self.content_creation_fraction));
        }
        if !(0.0..=1.0).contains(&self.mock.contagion_rate) {
            return bad("mock.contagion_rate must lie in [0,1]".into());
        }
        self.mix_ratios.validate().map_err(ConfigError::Invalid)?;
        self.scenario().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.backend.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.total_rounds(), 46);
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"population_size": 50, "scenario": "social_all"}"#).unwrap();
        assert_eq!(cfg.population_size, Some(50));
        assert_eq!(cfg.scenario, ScenarioKind::SocialAll);
        assert_eq!(cfg.feed_size, 5);
        assert!(RunConfig::from_json(r#"{"populaton_size": 50}"#).is_err());
    }

    #[test]
    fn seed_sets() {
        let mut cfg = RunConfig::default();
        let a = SeedSet::derive("s1");
        assert_eq!(a, SeedSet::derive("s1"));
        assert_ne!(a, SeedSet::derive("s2"));
        assert_ne!(a.schedule, a.mock);
        let custom = SeedSet { population: 1, schedule: 2, treatment: 3, mock: 4, creators: 5 };
        cfg.seed_sets.insert("mine".into(), custom);
        cfg.select_seed_set("mine");
        assert_eq!(cfg.seeds, custom);
        cfg.select_seed_set("s1");
        assert_eq!(cfg.seeds, a);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        cfg.population_path = Some("p.json".into());
        assert!(cfg.validate().is_ok());
        cfg.content_creation_fraction = 1.5;
        assert!(cfg.validate().is_err());
    }
}
