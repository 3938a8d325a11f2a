//! Service configuration: one flat TOML table.
//!
//! ```toml
//! bind = "127.0.0.1:8787"
//! k = 1000.0
//! tile_height = "auto"
//! settle_ms = 3000
//! backend = "live"
//! endpoint = "https://api.openai.com/v1"
//! model = "gpt-4"
//! api_key_env = "POETSLATE_API_KEY"
//! log_path = "sessions.jsonl"
//! ```
//!
//! The credential itself is only ever read from the environment variable
//! named by `api_key_env`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use poetslate_core::geometry::{GeometryConfig, TileHeight};
use poetslate_core::session::{SessionConfig, DEFAULT_EPSILON, DEFAULT_SETTLE_MS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::live::BackendConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Stub,
    Replay,
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub k: f64,
    pub tile_height: TileHeight<f64>,
    pub settle_ms: u64,
    pub epsilon: f64,
    pub tick_ms: u64,
    pub multi_session: bool,
    /// Word list to use instead of the built-in one.
    pub vocabulary: Option<PathBuf>,
    /// Session log (JSON lines); no log is written when unset.
    pub log_path: Option<PathBuf>,
    pub participant: Option<String>,
    pub backend: BackendKind,
    /// Transcript for the replay backend; the built-in examples when unset.
    pub replay_fixture: Option<PathBuf>,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub api_key_env: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let live = BackendConfig::default();
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8787)),
            k: GeometryConfig::<f64>::default().k,
            tile_height: TileHeight::Auto,
            settle_ms: DEFAULT_SETTLE_MS,
            epsilon: DEFAULT_EPSILON,
            tick_ms: 25,
            multi_session: false,
            vocabulary: None,
            log_path: None,
            participant: None,
            backend: BackendKind::Stub,
            replay_fixture: None,
            endpoint: live.endpoint,
            model: live.model,
            temperature: live.temperature,
            max_tokens: live.max_tokens,
            timeout_ms: live.timeout_ms,
            retries: live.retries,
            backoff_ms: live.backoff_ms,
            api_key_env: live.api_key_env,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.settle_ms == 0 {
            return Err(ConfigError::Invalid("settle_ms must be positive".into()));
        }
        if self.tick_ms == 0 {
            return Err(ConfigError::Invalid("tick_ms must be positive".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ConfigError::Invalid("epsilon must be finite and >= 0".into()));
        }
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> GeometryConfig<f64> {
        GeometryConfig {
            k: self.k,
            tile_height: self.tile_height,
        }
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            geometry: self.geometry(),
            settle_ms: self.settle_ms,
            epsilon: self.epsilon,
        }
    }

    pub fn backend_config(&self) -> BackendConfig {
        BackendConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            timeout_ms: self.timeout_ms,
            retries: self.retries,
            backoff_ms: self.backoff_ms,
            api_key_env: self.api_key_env.clone(),
        }
    }
}
