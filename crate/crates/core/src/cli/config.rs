use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Model and training configuration as read from `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad config file: {e}")))
    }
}

fn sections(cfg: &RunConfig) -> Map<String, Value> {
    match serde_json::to_value(cfg).expect("config serialises") {
        Value::Object(m) => m,
        _ => unreachable!("config is a struct"),
    }
}

/// Every key accepted by `--set`, as `section.field`.
pub fn override_keys() -> Vec<String> {
    sections(&RunConfig::default())
        .into_iter()
        .flat_map(|(section, fields)| match fields {
            Value::Object(f) => f.keys().map(|k| format!("{section}.{k}")).collect(),
            _ => Vec::new(),
        })
        .collect()
}

/// Applies `key=value` overrides. A key is either `section.field` or a bare
/// field name; values parse as JSON and fall back to a plain string, so
/// `ablation=baseline` and `lr=0.001` both work.
pub fn apply_overrides(cfg: &RunConfig, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut tree = sections(cfg);
    let unknown = |key: &str| {
        let bare: Vec<String> = override_keys()
            .iter()
            .map(|k| k.split_once('.').map_or(k.clone(), |(_, f)| f.to_string()))
            .collect();
        CliError::Usage(format!(
            "unknown config key `{key}`; valid keys: {}",
            bare.join(", ")
        ))
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{item}` is not key=value")))?;
        let key = key.trim();
        let (section, field) = match key.split_once('.') {
            Some((s, f)) => (s.to_string(), f.to_string()),
            None => {
                let owner = tree
                    .iter()
                    .find(|(_, v)| v.as_object().is_some_and(|o| o.contains_key(key)))
                    .map(|(s, _)| s.clone())
                    .ok_or_else(|| unknown(key))?;
                (owner, key.to_string())
            }
        };
        let slot = tree
            .get_mut(&section)
            .and_then(Value::as_object_mut)
            .filter(|o| o.contains_key(&field))
            .ok_or_else(|| unknown(key))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        slot.insert(field, value);
    }
    serde_json::from_value(Value::Object(tree))
        .map_err(|e| CliError::Usage(format!("invalid override value: {e}")))
}
