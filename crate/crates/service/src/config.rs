use std::path::Path;

use pair_core::monitor::{DEFAULT_DWELL_THRESHOLD, DEFAULT_MIN_CONFIDENCE};
use pair_core::reasoner::ReasonerConfig;
use serde::Deserialize;

pub const THETA_ENV: &str = "PAIR_THETA";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{THETA_ENV}={value} is not a number in [0, 1]")]
    BadTheta { value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub dwell_threshold: f64,
    pub min_confidence: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            dwell_threshold: DEFAULT_DWELL_THRESHOLD,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

/// ```toml
/// [reasoner]
/// similarity_threshold = 0.35
/// max_front_distance = 5.0
/// node_align_top_k = 8
///
/// [monitor]
/// dwell_threshold = 2.0
/// min_confidence = 0.8
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub reasoner: ReasonerConfig,
    pub monitor: MonitorConfig,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.reasoner
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.monitor.dwell_threshold.is_nan() || self.monitor.dwell_threshold <= 0.0 {
            return Err(ConfigError::Invalid("dwell_threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.monitor.min_confidence) {
            return Err(ConfigError::Invalid("min_confidence must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Applies `PAIR_THETA` when set (passed in so callers control the source).
    pub fn with_theta_override(mut self, value: Option<&str>) -> Result<Self, ConfigError> {
        if let Some(v) = value {
            let theta: f64 = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadTheta { value: v.to_string() })?;
            if !(0.0..=1.0).contains(&theta) {
                return Err(ConfigError::BadTheta { value: v.to_string() });
            }
            self.reasoner.similarity_threshold = theta;
        }
        Ok(self)
    }

    pub fn from_env(self) -> Result<Self, ConfigError> {
        let value = std::env::var(THETA_ENV).ok();
        self.with_theta_override(value.as_deref())
    }
}
