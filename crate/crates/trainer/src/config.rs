//! Service configuration: one TOML file plus environment overrides.
//!
//! ```toml
//! port = 8080
//! bind = "127.0.0.1"
//! data_dir = "trainer-data"
//! ratio_table = "ratios.toml"   # optional; bundled table otherwise
//! snapshot_every = 5
//! ```
//!
//! `PTRAIN_PORT`, `PTRAIN_DATA_DIR` and `PTRAIN_RATIO_TABLE` override the
//! corresponding keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const ENV_PORT: &str = "PTRAIN_PORT";
pub const ENV_DATA_DIR: &str = "PTRAIN_DATA_DIR";
pub const ENV_RATIO_TABLE: &str = "PTRAIN_RATIO_TABLE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("{name} = {value:?} is invalid")]
    Invalid { name: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub bind: String,
    pub data_dir: PathBuf,
    pub ratio_table: Option<PathBuf>,
    /// Attempts per learner between profile snapshots.
    pub snapshot_every: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            bind: "127.0.0.1".into(),
            data_dir: PathBuf::from("trainer-data"),
            ratio_table: None,
            snapshot_every: 5,
        }
    }
}

impl ServiceConfig {
    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: dir.into(),
            ..Self::default()
        }
    }

    pub fn from_toml(document: &str) -> Result<Self, ConfigError> {
        toml::from_str(document).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads `path` when given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_owned(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        config.apply_overrides(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn apply_overrides(
        &mut self,
        get: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_PORT) {
            self.port = v.parse().map_err(|_| ConfigError::Invalid {
                name: ENV_PORT,
                value: v,
            })?;
        }
        if let Some(v) = get(ENV_DATA_DIR) {
            self.data_dir = v.into();
        }
        if let Some(v) = get(ENV_RATIO_TABLE) {
            self.ratio_table = Some(v.into());
        }
        Ok(())
    }
}
