use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use prefgait::query::SessionConfig;
use serde::{Deserialize, Serialize};

pub const PORT_ENV: &str = "PREFGAIT_PORT";
pub const DATA_DIR_ENV: &str = "PREFGAIT_DATA_DIR";

/// Settings for `prefgait serve`, read from a JSON file and then overridden
/// by `PREFGAIT_PORT` / `PREFGAIT_DATA_DIR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Sync every log line to disk before acknowledging.
    pub durable: bool,
    /// Base config that `POST /sessions` bodies are merged onto.
    pub session_defaults: SessionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            data_dir: PathBuf::from("prefgait-data"),
            durable: true,
            session_defaults: SessionConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{var}={value:?} is not a valid port")]
    Port { var: &'static str, value: String },
    #[error("invalid session defaults: {0}")]
    Session(#[from] prefgait::query::QueryError),
}

impl ServiceConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            None => Self::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                    path: path.to_path_buf(),
                    source,
                })?
            }
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.session_defaults.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(value) = get(PORT_ENV) {
            self.port = value.trim().parse().map_err(|_| ConfigError::Port {
                var: PORT_ENV,
                value,
            })?;
        }
        if let Some(dir) = get(DATA_DIR_ENV) {
            self.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.host, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file_values() {
        let mut c = ServiceConfig::default();
        c.apply_env(|k| match k {
            PORT_ENV => Some("9100".into()),
            DATA_DIR_ENV => Some("/tmp/x".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.data_dir, PathBuf::from("/tmp/x"));
        assert!(c.apply_env(|_| Some("http".into())).is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: ServiceConfig = serde_json::from_str(r#"{"port": 7000, "session_defaults": {"comparisons": 5}}"#).unwrap();
        assert_eq!(c.port, 7000);
        assert_eq!(c.session_defaults.comparisons, 5);
        assert_eq!(c.session_defaults.batch_size, 40);
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"prot": 1}"#).is_err());
    }
}
