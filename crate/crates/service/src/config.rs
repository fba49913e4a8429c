use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_BODY_LIMIT: usize = 256 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("environment variable {name}: {detail}")]
    Env { name: &'static str, detail: String },
}

/// Server settings: a TOML file, then `CELLVAULT_*` environment overrides.
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// store = "/var/lib/cellvault"
/// token = "s3cret"
/// body_limit = 268435456
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub store: PathBuf,
    pub token: Option<String>,
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            store: PathBuf::from("cellvault-data"),
            token: None,
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads `file` when given and applies the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        base.with_env(|name| std::env::var(name).ok())
    }

    pub fn with_env(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = var("CELLVAULT_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("CELLVAULT_STORE") {
            self.store = PathBuf::from(v);
        }
        if let Some(v) = var("CELLVAULT_TOKEN") {
            self.token = Some(v).filter(|t| !t.is_empty());
        }
        if let Some(v) = var("CELLVAULT_BODY_LIMIT") {
            self.body_limit = v.parse().map_err(|e| ConfigError::Env {
                name: "CELLVAULT_BODY_LIMIT",
                detail: format!("{v:?}: {e}"),
            })?;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let cfg = ServiceConfig::from_toml(
            "listen = \"0.0.0.0:9000\"\ntoken = \"t\"\n",
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(cfg.listen, "0.0.0.0:9000");
        assert_eq!(cfg.body_limit, DEFAULT_BODY_LIMIT);
        let cfg = cfg
            .with_env(|n| match n {
                "CELLVAULT_STORE" => Some("/data".into()),
                "CELLVAULT_BODY_LIMIT" => Some("1024".into()),
                "CELLVAULT_TOKEN" => Some(String::new()),
                _ => None,
            })
            .unwrap();
        assert_eq!(cfg.store, PathBuf::from("/data"));
        assert_eq!(cfg.body_limit, 1024);
        assert_eq!(cfg.token, None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_env() {
        assert!(ServiceConfig::from_toml("port = 1", Path::new("c.toml")).is_err());
        let bad = ServiceConfig::default()
            .with_env(|n| (n == "CELLVAULT_BODY_LIMIT").then(|| "lots".into()));
        assert!(matches!(bad, Err(ConfigError::Env { .. })));
    }
}
