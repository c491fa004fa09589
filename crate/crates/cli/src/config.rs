//! Layered configuration: defaults, then the config file, then `--set`
//! overrides, then dedicated flags.

use std::path::{Path, PathBuf};

use cfprobe::eval::{EvaluationSettings, Method};
use cfprobe::RunConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// The `[evaluation]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub method: Method,
    pub bins: usize,
    pub bootstrap_iterations: usize,
    pub confidence_level: f64,
    pub self_consistency_samples: u32,
    pub baseline_threshold: f64,
    pub curve_path: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let s = EvaluationSettings::default();
        EvalConfig {
            method: Method::CounterfactualProbing,
            bins: s.bins,
            bootstrap_iterations: s.bootstrap_iterations,
            confidence_level: s.confidence_level,
            self_consistency_samples: s.self_consistency_samples,
            baseline_threshold: s.baseline_threshold,
            curve_path: None,
        }
    }
}

impl EvalConfig {
    pub fn settings(&self) -> EvaluationSettings {
        EvaluationSettings {
            bins: self.bins,
            bootstrap_iterations: self.bootstrap_iterations,
            confidence_level: self.confidence_level,
            self_consistency_samples: self.self_consistency_samples,
            baseline_threshold: self.baseline_threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub run: RunConfig,
    pub evaluation: EvalConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("malformed override `{0}` (expected key=value)")]
    Override(String),
    #[error("`{key}` cannot be set: `{parent}` is not a table")]
    NotATable { key: String, parent: String },
}

impl CliConfig {
    pub fn to_table(&self) -> Table {
        let mut table = match Value::try_from(&self.run).expect("run config serializes") {
            Value::Table(t) => t,
            _ => unreachable!("structs serialize to tables"),
        };
        table.insert("evaluation".into(), Value::try_from(&self.evaluation).expect("evaluation config serializes"));
        table
    }

    pub fn from_table(mut table: Table) -> Result<Self, ConfigError> {
        let mut unknown = Vec::new();
        let evaluation = match table.remove("evaluation") {
            Some(v) => serde_ignored::deserialize(v, |p| unknown.push(format!("evaluation.{p}")))
                .map_err(|e| ConfigError::Parse(format!("[evaluation]: {e}")))?,
            None => EvalConfig::default(),
        };
        let run = serde_ignored::deserialize(Value::Table(table), |p| unknown.push(p.to_string()))
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        Ok(CliConfig { run, evaluation })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&self.to_table()).expect("config serializes")
    }
}

pub fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
    text.parse::<Table>()
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })
}

/// A TOML literal when the text parses as one, otherwise a bare string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(key.to_string()));
    }
    let mut current = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = current.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        current = entry.as_table_mut().ok_or_else(|| ConfigError::NotATable {
            key: key.to_string(),
            parent: parts[..=i].join("."),
        })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    set_path(table, key.trim(), parse_value(raw.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = CliConfig::default();
        let back = CliConfig::from_table(c.to_toml().parse().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn values_and_paths() {
        assert_eq!(parse_value("0.7"), Value::Float(0.7));
        assert_eq!(parse_value("4"), Value::Integer(4));
        assert_eq!(parse_value("remote"), Value::String("remote".into()));
        assert_eq!(parse_value("\"a b\""), Value::String("a b".into()));
        let mut t = Table::new();
        apply_override(&mut t, "backend.mock.jitter=0.01").unwrap();
        apply_override(&mut t, "weights.threshold = 0.6").unwrap();
        let c = CliConfig::from_table(t).unwrap();
        assert_eq!(c.run.backend.mock.jitter, Some(0.01));
        assert_eq!(c.run.weights.threshold, 0.6);
        assert!(apply_override(&mut Table::new(), "seed").is_err());
        assert!(apply_override(&mut Table::new(), "a..b=1").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let t: Table = "sede = 3\n[evaluation]\nbinz = 4\n".parse().unwrap();
        match CliConfig::from_table(t) {
            Err(ConfigError::UnknownKeys(keys)) => assert_eq!(keys, vec!["evaluation.binz", "sede"]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
