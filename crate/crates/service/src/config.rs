//! Service configuration: a JSON file, then `SENTINEL_*` environment
//! overrides, then validation.

use std::path::{Path, PathBuf};

use sentinel_core::{RiskEstimator, ThresholdConfig, VarianceNormalization};
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;

pub const ENV_PREFIX: &str = "SENTINEL_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("environment variable {var}={value:?}: {message}")]
    Env {
        var: String,
        value: String,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] sentinel_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub phi_initial: f64,
    pub delta: f64,
    pub tau: u32,
    pub phi_min: f64,
    pub phi_max: f64,
    pub alpha: f64,
    pub n_min: u64,
    pub variance_normalization: VarianceNormalization,
    /// Lexicon file; the bundled lexicon when absent.
    pub lexicon_path: Option<PathBuf>,
    /// Knowledge-base snapshot the log is replayed over; empty when absent.
    pub snapshot_path: Option<PathBuf>,
    /// Event log; events are kept in memory only when absent.
    pub log_path: Option<PathBuf>,
    pub listen_addr: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let t = ThresholdConfig::default();
        let e = RiskEstimator::default();
        Self {
            phi_initial: t.phi_initial,
            delta: t.delta,
            tau: t.tau,
            phi_min: t.phi_min,
            phi_max: t.phi_max,
            alpha: e.alpha,
            n_min: e.n_min,
            variance_normalization: e.normalization,
            lexicon_path: None,
            snapshot_path: None,
            log_path: None,
            listen_addr: "127.0.0.1:8080".to_string(),
        }
    }
}

impl ServiceConfig {
    /// File (if any) plus the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Json {
            path: path.to_owned(),
            source,
        })
    }

    /// Applies `SENTINEL_<FIELD>` overrides; other variables are ignored.
    /// An empty value clears an optional path.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        for (var, value) in vars {
            let Some(key) = var.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let bad = |message: String| ConfigError::Env {
                var: var.clone(),
                value: value.clone(),
                message,
            };
            let float = || value.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            let path = || (!value.is_empty()).then(|| PathBuf::from(&value));
            match key.to_ascii_lowercase().as_str() {
                "phi_initial" => self.phi_initial = float()?,
                "delta" => self.delta = float()?,
                "phi_min" => self.phi_min = float()?,
                "phi_max" => self.phi_max = float()?,
                "alpha" => self.alpha = float()?,
                "tau" => self.tau = value.trim().parse().map_err(|e| bad(format!("{e}")))?,
                "n_min" => self.n_min = value.trim().parse().map_err(|e| bad(format!("{e}")))?,
                "variance_normalization" => {
                    self.variance_normalization =
                        serde_json::from_value(serde_json::Value::String(value.trim().to_string()))
                            .map_err(|e| bad(e.to_string()))?
                }
                "lexicon_path" => self.lexicon_path = path(),
                "snapshot_path" => self.snapshot_path = path(),
                "log_path" => self.log_path = path(),
                "listen_addr" => self.listen_addr = value.clone(),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            thresholds: ThresholdConfig {
                phi_initial: self.phi_initial,
                delta: self.delta,
                tau: self.tau,
                phi_min: self.phi_min,
                phi_max: self.phi_max,
            },
            estimator: RiskEstimator {
                alpha: self.alpha,
                n_min: self.n_min,
                normalization: self.variance_normalization,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine_config().validate()?;
        Ok(())
    }
}
