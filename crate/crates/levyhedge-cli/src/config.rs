//! Loading experiment configurations from TOML.

use std::path::Path;

use levyhedge::experiment::ExperimentConfig;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "LEVYHEDGE_SEED";

/// A validated configuration with its provenance hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// SHA-256 of the effective configuration (after overrides).
    pub hash: String,
}

/// Parses a configuration document; errors name the offending field and line.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Reads, overrides and validates the configuration at `path`.
pub fn load(path: &Path, seed_override: Option<&str>) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse(&text)?;
    if let Some(s) = seed_override {
        config.seed = s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?;
    }
    config.validate()?;
    let hash = config_hash(&config);
    Ok(LoadedConfig { config, hash })
}

/// Hash of the canonical JSON form, so that formatting changes to the file
/// do not alter it but every effective setting does.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("configurations serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// Default configuration as TOML.
pub fn defaults_toml() -> String {
    toml::to_string(&ExperimentConfig::example()).expect("defaults serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = parse(&defaults_toml()).unwrap();
        assert_eq!(c, ExperimentConfig::example());
    }

    #[test]
    fn unknown_field_is_reported_by_name() {
        let text = defaults_toml().replace("paths_per_n", "paths_per_m");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("paths_per_m"), "{err}");
    }

    #[test]
    fn hash_tracks_effective_settings() {
        let a = ExperimentConfig::example();
        let mut b = a.clone();
        b.seed += 1;
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
