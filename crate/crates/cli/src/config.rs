//! Config files: TOML mirroring `SimConfig` field names, or a run manifest.

use std::path::Path;

use quorum_core::model::SimConfig;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Bundled reference configuration, identical to [`SimConfig::baseline`].
pub const BASELINE_TOML: &str = include_str!("../../../configs/baseline.toml");

pub fn parse_toml(text: &str) -> CliResult<SimConfig> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a TOML config, or the `config` object of a JSON manifest.
pub fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let cfg = if is_json {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        serde_json::from_value::<SimConfig>(inner)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str::<SimConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// `path` if given, otherwise the bundled baseline.
pub fn load_or_default(path: Option<&Path>) -> CliResult<SimConfig> {
    match path {
        Some(p) => load_config(p),
        None => parse_toml(BASELINE_TOML),
    }
}

/// Hex SHA-256 of the canonical JSON form.
pub fn config_hash(cfg: &SimConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Sets `key` (dotted path, array elements by index) to the TOML literal `value`.
pub fn apply_override(cfg: &SimConfig, key: &str, value: &str) -> CliResult<SimConfig> {
    let mut root = toml::Value::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let parsed: toml::Table = toml::from_str(&format!("v = {value}"))
        .map_err(|e| CliError::Config(format!("override `{key}`: bad value `{value}`: {e}")))?;
    let new = parsed["v"].clone();
    let mut node = &mut root;
    for part in key.split('.') {
        node = match node {
            toml::Value::Table(t) => t.get_mut(part),
            toml::Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::Config(format!("override `{key}`: no field `{part}`")))?;
    }
    *node = match (&*node, new) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    let cfg: SimConfig = root
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("override `{key}`: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `KEY=VALUE`.
pub fn split_override(s: &str) -> CliResult<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Config(format!("override `{s}` is not KEY=VALUE")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_is_the_baseline() {
        assert_eq!(parse_toml(BASELINE_TOML).unwrap(), SimConfig::baseline());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = BASELINE_TOML.replace("dt = 0.01", "dt = 0.01\ndtt = 0.02");
        let err = parse_toml(&text).unwrap_err().to_string();
        assert!(err.contains("dtt"), "{err}");
    }

    #[test]
    fn zero_dt_names_the_field() {
        let text = BASELINE_TOML.replace("dt = 0.01", "dt = 0.0");
        let err = parse_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn overrides() {
        let base = SimConfig::baseline();
        let c = apply_override(&base, "env.sigma_a", "0").unwrap();
        assert_eq!(c.env.sigma_a, 0.0);
        let c = apply_override(&base, "species.1.n_cells", "7").unwrap();
        assert_eq!(c.species[1].n_cells, 7);
        assert!(apply_override(&base, "env.sigma_b", "0").is_err());
        assert!(apply_override(&base, "dt", "-1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = SimConfig::baseline();
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&a.clone().with_seed(1)));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
