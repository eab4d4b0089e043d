//! Sectioned run configuration: defaults, then the config file, then
//! `--set section.key=value` overrides, then dedicated flags.

use std::path::Path;

use coincept::datasets::{ClassesConfig, ToyConfig};
use coincept::encoder::EncoderConfig;
use coincept::tasks::anomaly::AnomalySpec;
use coincept::tasks::classify::ClassifySpec;
use coincept::tasks::forecast::ForecastSpec;
use coincept::trainer::TrainConfig;
use coincept::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub forecast: ForecastSpec,
    pub classify: ClassifySpec,
    pub anomaly: AnomalySpec,
    pub toy: ToyConfig,
    pub classes: ClassesConfig,
}

/// Resolved configuration plus the `[encoder]` keys the user set explicitly.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub encoder_keys: toml::Table,
}

impl Resolved {
    /// Explicitly set encoder keys whose values differ from `actual`.
    pub fn encoder_conflicts(&self, actual: &EncoderConfig) -> Vec<String> {
        let actual = toml::Table::try_from(actual).expect("encoder config serializes");
        self.encoder_keys
            .iter()
            .filter(|(k, v)| actual.get(k.as_str()) != Some(v))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("--set expects section.key=value, got {spec:?}")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.len() < 2 || path.iter().any(String::is_empty) {
        return Err(invalid(format!("--set key must be section.key, got {key:?}")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn insert(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(format!("{p} is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Resolved> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            toml::from_str::<toml::Table>(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        let (path, value) = parse_override(o)?;
        insert(&mut table, &path, value)?;
    }
    let encoder_keys = table
        .get("encoder")
        .and_then(toml::Value::as_table)
        .cloned()
        .unwrap_or_default();
    let config: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| invalid(format!("config: {}", e.message())))?;
    Ok(Resolved { config, encoder_keys })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.train.validate()?;
        self.forecast.validate()?;
        self.classify.validate()?;
        self.anomaly.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
