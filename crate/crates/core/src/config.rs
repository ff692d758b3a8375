//! Experiment configuration: TOML on disk, dotted-path overrides, and sweep
//! point expansion.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backing::{RouterConfig, StoreConfig};
use crate::netsim::{DelayModel, DelaySampling};
use crate::workload::WorkloadConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("no sweep points: the sweep list is empty")]
    EmptySweep,
}

impl ConfigError {
    fn invalid((field, message): (&str, String)) -> Self {
        ConfigError::Invalid { field: field.to_string(), message }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FogConfig {
    pub n_nodes: u32,
    pub cache_capacity: usize,
    pub loss_probability: f64,
    pub delay: DelayModel,
    pub delay_sampling: DelaySampling,
    /// How long a reader waits for responses.
    pub response_window_s: f64,
    pub ping_timeout_s: f64,
    /// Ping rounds in the latency probe. 0 skips the probe.
    pub rtt_rounds: u32,
}

impl Default for FogConfig {
    fn default() -> Self {
        FogConfig {
            n_nodes: 50,
            cache_capacity: 200,
            loss_probability: 0.0,
            delay: DelayModel::default(),
            delay_sampling: DelaySampling::default(),
            response_window_s: 0.5,
            ping_timeout_s: 1.0,
            rtt_rounds: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of the swept field, e.g. `fog.n_nodes`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Leading fraction of the run left out of steady-state reports.
    pub warmup_fraction: f64,
    pub fog: FogConfig,
    pub store: StoreConfig,
    pub router: RouterConfig,
    pub workload: WorkloadConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            warmup_fraction: 0.2,
            fog: FogConfig::default(),
            store: StoreConfig::default(),
            router: RouterConfig::default(),
            workload: WorkloadConfig::default(),
            sweep: Vec::new(),
        }
    }
}

/// One point of a sweep: the parameter assignments and the resulting config.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid((field, format!("must be positive, got {v}"))))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Loads a TOML config, or the config embedded in a run manifest when
    /// the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
            let config = manifest
                .get("config")
                .ok_or_else(|| ConfigError::Parse(format!("{}: manifest has no `config` object", path.display())))?;
            serde_json::from_value(config.clone()).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?
        } else {
            Self::from_toml_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn to_toml_value(&self) -> toml::Value {
        toml::Value::try_from(self).expect("config serializes to toml")
    }

    fn from_toml_value(value: toml::Value) -> Result<Self, ConfigError> {
        value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Returns a copy with `path` set to `value`. Unknown fields and values
    /// of the wrong type are rejected.
    pub fn with_value(&self, path: &str, value: toml::Value) -> Result<Self, ConfigError> {
        let mut root = self.to_toml_value();
        let mut parts = path.split('.').peekable();
        let mut cursor = &mut root;
        while let Some(part) = parts.next() {
            if part.is_empty() {
                return Err(ConfigError::invalid(("override", format!("empty segment in `{path}`"))));
            }
            let table = cursor
                .as_table_mut()
                .ok_or_else(|| ConfigError::Invalid { field: path.into(), message: "not a table".into() })?;
            if parts.peek().is_none() {
                table.insert(part.to_string(), value);
                break;
            }
            cursor = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        Self::from_toml_value(root).map_err(|e| ConfigError::Invalid { field: path.to_string(), message: e.to_string() })
    }

    /// Applies a `key=value` override. The value is read as a TOML literal,
    /// falling back to a bare string.
    pub fn with_override(&self, assignment: &str) -> Result<Self, ConfigError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::BadOverride(assignment.into()))?;
        let (key, raw) = (key.trim(), raw.trim());
        if key.is_empty() {
            return Err(ConfigError::BadOverride(assignment.into()));
        }
        self.with_value(key, parse_literal(raw))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.fog;
        if f.n_nodes == 0 {
            return Err(ConfigError::invalid(("fog.n_nodes", "must be at least 1".into())));
        }
        if f.cache_capacity == 0 {
            return Err(ConfigError::invalid(("fog.cache_capacity", "must be at least 1".into())));
        }
        if !(0.0..=1.0).contains(&f.loss_probability) {
            return Err(ConfigError::invalid(("fog.loss_probability", format!("must lie in [0, 1], got {}", f.loss_probability))));
        }
        f.delay.validate().map_err(|m| ConfigError::invalid(("fog.delay", m)))?;
        positive("fog.response_window_s", f.response_window_s)?;
        positive("fog.ping_timeout_s", f.ping_timeout_s)?;
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(ConfigError::invalid(("warmup_fraction", format!("must lie in [0, 1), got {}", self.warmup_fraction))));
        }
        self.store.validate().map_err(ConfigError::invalid)?;
        self.router.validate().map_err(ConfigError::invalid)?;
        self.workload.validate().map_err(ConfigError::invalid)?;
        Ok(())
    }

    /// Stable 64-bit hash of the canonical JSON form, as 16 hex digits.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes to json");
        format!("{:016x}", xxhash_rust::xxh3::xxh3_64(json.as_bytes()))
    }

    /// Expands the sweep axes into their cartesian product, first axis
    /// outermost. Each point carries `seed + index` and no sweep list.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        if self.sweep.is_empty() || self.sweep.iter().any(|a| a.values.is_empty()) {
            return Err(ConfigError::EmptySweep);
        }
        let base = ExperimentConfig { sweep: Vec::new(), ..self.clone() };
        let mut combos: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
        for axis in &self.sweep {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut c = prefix.clone();
                        c.push((axis.parameter.clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .enumerate()
            .map(|(index, assignments)| {
                let mut config = base.clone();
                for (path, value) in &assignments {
                    config = config.with_value(path, value.clone())?;
                }
                config.seed = self.seed.wrapping_add(index as u64);
                config.validate()?;
                Ok(SweepPoint { index, assignments, config })
            })
            .collect()
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
