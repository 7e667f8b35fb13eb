use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::HubError;

pub const ENV_PORT: &str = "CBRNE_PORT";
pub const ENV_DATA_DIR: &str = "CBRNE_DATA_DIR";
pub const ENV_CORPUS_DIR: &str = "CBRNE_CORPUS_DIR";
pub const ENV_SCENARIOS_DIR: &str = "CBRNE_SCENARIOS_DIR";

/// Hub settings. Values come from an optional TOML file, then environment
/// variables, then whatever the caller sets explicitly.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HubConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    /// Overrides the corpus named by a scenario file.
    pub corpus_dir: Option<PathBuf>,
    pub scenarios_dir: PathBuf,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            port: 8080,
            data_dir: PathBuf::from("data"),
            corpus_dir: None,
            scenarios_dir: PathBuf::from("scenarios"),
        }
    }
}

impl HubConfig {
    pub fn from_file(path: &Path) -> Result<HubConfig, HubError> {
        let text = std::fs::read_to_string(path).map_err(|e| HubError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HubError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `CBRNE_*` overrides from `lookup`, normally `std::env::var`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<HubConfig, HubError> {
        if let Some(port) = lookup(ENV_PORT) {
            self.port = port.parse().map_err(|_| HubError::Config(format!("{ENV_PORT}={port} is not a port")))?;
        }
        if let Some(dir) = lookup(ENV_DATA_DIR) {
            self.data_dir = dir.into();
        }
        if let Some(dir) = lookup(ENV_CORPUS_DIR) {
            self.corpus_dir = Some(dir.into());
        }
        if let Some(dir) = lookup(ENV_SCENARIOS_DIR) {
            self.scenarios_dir = dir.into();
        }
        Ok(self)
    }
}
