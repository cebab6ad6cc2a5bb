//! Scenario files and dotted-key overrides.

use std::fs;
use std::path::Path;

use semsched_core::{ConfigError, ScenarioConfig};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {source}")]
    BadValue { key: String, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

/// Short names accepted by [`set_key`].
const ALIASES: &[(&str, &str)] = &[
    ("urgency_error", "predictor.urgency_error"),
    ("length_error", "predictor.length_error"),
    ("latency", "predictor.latency_s"),
    ("strategy", "predictor.strategy"),
    ("capacity", "memory_capacity"),
];

pub fn canonical_key(key: &str) -> &str {
    ALIASES.iter().find(|(a, _)| *a == key).map_or(key, |(_, full)| full)
}

/// Parses a JSON scenario; missing fields take their defaults.
pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

/// Interprets a command-line value: JSON if it parses, a bare string
/// otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

/// Sets a dotted key such as `predictor.latency_s`. The key must already
/// exist; the result is validated.
pub fn set_key(cfg: &ScenarioConfig, key: &str, value: Value) -> Result<ScenarioConfig, ScenarioError> {
    let full = canonical_key(key);
    let mut tree = serde_json::to_value(cfg)?;
    let mut slot = &mut tree;
    for part in full.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| ScenarioError::UnknownKey(key.to_owned()))?;
    }
    *slot = value;
    let out: ScenarioConfig =
        serde_json::from_value(tree).map_err(|source| ScenarioError::BadValue { key: key.to_owned(), source })?;
    out.validate()?;
    Ok(out)
}
