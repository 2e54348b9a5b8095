//! Layered TOML configuration: built-in defaults, then an optional file,
//! then `section.key=value` overrides. Keys are strict: anything the
//! defaults do not contain is rejected, as is a value of the wrong type.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnc::DncConfig;
use crate::neural::{Encoding, HyperParams, TeachConfig, Thresholds};
use crate::planner::{Criteria, PlanSettings, PlannerConfig};
use crate::recognition::ClassifyConfig;
use crate::sim::SimConfig;

/// Environment variable naming a config file when none is given explicitly.
pub const CONFIG_ENV: &str = "NEUROCNC_CONFIG";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: expected {expected}, found {found}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("config key `{0}`: value out of range")]
    Invalid(String),
}

impl ConfigError {
    /// The offending key, when the error is about one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) | ConfigError::Invalid(k) => Some(k),
            ConfigError::TypeMismatch { key, .. } => Some(key),
            _ => None,
        }
    }
}

/// Network size, training and teaching-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NnConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    /// Epochs of the first round; each further round doubles them.
    pub epochs: usize,
    pub init_range: f64,
    pub max_rounds: usize,
    pub test_fraction: f64,
    pub mean_threshold: f64,
    pub max_threshold: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        let t = TeachConfig::default();
        Self {
            hidden_dim: t.hyper.hidden_dim,
            learning_rate: t.hyper.learning_rate,
            epochs: t.hyper.epochs,
            init_range: t.hyper.init_range,
            max_rounds: t.max_rounds,
            test_fraction: t.test_fraction,
            mean_threshold: t.thresholds.mean,
            max_threshold: t.thresholds.max,
        }
    }
}

/// Pass thresholds of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Largest Hausdorff distance between the two modes' cutting paths, as
    /// a share of the stock diagonal.
    pub hausdorff_fraction: f64,
    /// Largest height-field deviation of the nn-mode result, mm.
    pub max_dev: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            hausdorff_fraction: 0.02,
            max_dev: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Seeds network initialization, the train/test split and corpora.
    pub seed: u64,
    pub criteria: Criteria,
    pub planner: PlannerConfig,
    pub classify: ClassifyConfig,
    pub nn: NnConfig,
    pub encoding: Encoding,
    pub sim: SimConfig,
    pub dnc: DncConfig,
    pub verify: VerifyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            criteria: Criteria::default(),
            planner: PlannerConfig::default(),
            classify: ClassifyConfig::default(),
            nn: NnConfig::default(),
            encoding: Encoding::default(),
            sim: SimConfig::default(),
            dnc: DncConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

fn type_name(v: &toml::Value) -> &'static str {
    match v {
        toml::Value::String(_) => "string",
        toml::Value::Integer(_) => "integer",
        toml::Value::Float(_) => "float",
        toml::Value::Boolean(_) => "boolean",
        toml::Value::Datetime(_) => "datetime",
        toml::Value::Array(_) => "array",
        toml::Value::Table(_) => "table",
    }
}

/// Merges `src` into `dst`, refusing keys `dst` lacks and values whose type
/// differs. Integers are accepted where a float is expected.
fn merge(dst: &mut toml::Table, src: &toml::Table, prefix: &str) -> Result<(), ConfigError> {
    for (k, v) in src {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let slot = dst.get_mut(k).ok_or_else(|| ConfigError::UnknownKey(key.clone()))?;
        match (slot, v) {
            (toml::Value::Table(d), toml::Value::Table(s)) => merge(d, s, &key)?,
            (slot @ toml::Value::Float(_), toml::Value::Integer(i)) => *slot = toml::Value::Float(*i as f64),
            (slot, v) if type_name(slot) == type_name(v) && !matches!(v, toml::Value::Table(_)) => *slot = v.clone(),
            (slot, v) => {
                return Err(ConfigError::TypeMismatch {
                    key,
                    expected: type_name(slot),
                    found: type_name(v),
                })
            }
        }
    }
    Ok(())
}

/// Parses the right-hand side of an override as a TOML value; bare words
/// that are not valid TOML are taken as strings.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl Config {
    fn as_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }

    fn from_table(t: toml::Table, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| ConfigError::Syntax {
            origin: origin.to_string(),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Layers a TOML document over this config.
    pub fn apply_toml(&self, text: &str, origin: &str) -> Result<Self, ConfigError> {
        let src: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax {
            origin: origin.to_string(),
            message: e.message().to_string(),
        })?;
        let mut t = self.as_table();
        merge(&mut t, &src, "")?;
        Self::from_table(t, origin)
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&self, assignment: &str) -> Result<Self, ConfigError> {
        let (path, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: "--set".to_string(),
            message: format!("`{assignment}` is not key=value"),
        })?;
        let path = path.trim();
        let mut src = toml::Table::new();
        let mut parts: Vec<&str> = path.split('.').collect();
        let leaf = parts.pop().unwrap_or_default();
        let mut cur = &mut src;
        for p in parts {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("fresh table");
        }
        cur.insert(leaf.to_string(), parse_value(raw.trim()));
        let mut t = self.as_table();
        merge(&mut t, &src, "")?;
        Self::from_table(t, "--set")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str| ConfigError::Invalid(k.to_string());
        self.planner.validate().map_err(|k| bad(&format!("planner.{k}")))?;
        self.sim.validate().map_err(|k| bad(&format!("sim.{k}")))?;
        let c = &self.classify;
        for (k, v) in [
            ("deep_hole_ratio", c.deep_hole_ratio),
            ("finish_max_ra", c.finish_max_ra),
            ("contour_finish_max_depth", c.contour_finish_max_depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(&format!("classify.{k}")));
            }
        }
        let n = &self.nn;
        let checks = [
            ("nn.hidden_dim", n.hidden_dim > 0),
            ("nn.learning_rate", n.learning_rate > 0.0 && n.learning_rate.is_finite()),
            ("nn.epochs", n.epochs > 0),
            ("nn.init_range", n.init_range >= 0.0 && n.init_range.is_finite()),
            ("nn.test_fraction", n.test_fraction > 0.0 && n.test_fraction < 1.0),
            ("nn.mean_threshold", n.mean_threshold > 0.0),
            ("nn.max_threshold", n.max_threshold > 0.0),
            ("encoding.m", self.encoding.m >= 3),
            ("encoding.k", self.encoding.k >= 2),
            ("encoding.f_max", self.encoding.f_max > 0.0),
            ("encoding.s_max", self.encoding.s_max > 0.0),
            ("encoding.chord_tol", self.encoding.chord_tol > 0.0),
            ("dnc.ack_timeout_ms", self.dnc.ack_timeout_ms > 0),
            ("dnc.session_timeout_ms", self.dnc.session_timeout_ms > 0),
            ("verify.hausdorff_fraction", self.verify.hausdorff_fraction > 0.0),
            ("verify.max_dev", self.verify.max_dev > 0.0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((k, _)) => Err(bad(k)),
            None => Ok(()),
        }
    }

    pub fn plan_settings(&self) -> PlanSettings {
        PlanSettings {
            planner: self.planner.clone(),
            classify: self.classify.clone(),
        }
    }

    pub fn teach_config(&self) -> TeachConfig {
        let n = &self.nn;
        TeachConfig {
            hyper: HyperParams {
                hidden_dim: n.hidden_dim,
                learning_rate: n.learning_rate,
                epochs: n.epochs,
                init_range: n.init_range,
                seed: self.seed,
            },
            thresholds: Thresholds {
                mean: n.mean_threshold,
                max: n.max_threshold,
            },
            max_rounds: n.max_rounds,
            test_fraction: n.test_fraction,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// The file to read: `explicit` if given, else the path in `NEUROCNC_CONFIG`.
pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

/// Defaults, then the file at `path` (if any), then each override in order.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        cfg = cfg.apply_toml(&text, &p.display().to_string())?;
    }
    for o in overrides {
        cfg = cfg.apply_override(o)?;
    }
    Ok(cfg)
}
