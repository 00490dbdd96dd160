//! The JSON configuration document shared by the CLI and the service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, RewardWeights, DEFAULT_HORIZON};
use crate::flawdet::{validate_rules, DetectorConfig, FlawRule};
use crate::model::{Deployment, TargetsConfig};
use crate::simenv::EnvConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{section}: {message}")]
    Invalid {
        section: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub env: EnvConfig,
    pub targets: TargetsConfig,
    pub agent: AgentConfig,
    pub weights: RewardWeights,
    pub detector: DetectorConfig,
    pub rules: Vec<FlawRule>,
    pub deployment: Deployment,
    /// Length of one aggregation step window, ms.
    pub window_ms: i64,
    pub horizon: u32,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            env: EnvConfig::default(),
            targets: TargetsConfig::default(),
            agent: AgentConfig::default(),
            weights: RewardWeights::default(),
            detector: DetectorConfig::default(),
            rules: Vec::new(),
            deployment: Deployment::default(),
            window_ms: 60_000,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: AppConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(section: &'static str, e: impl ToString) -> ConfigError {
            ConfigError::Invalid {
                section,
                message: e.to_string(),
            }
        }
        self.env.validate().map_err(|e| invalid("env", e))?;
        self.targets.validate().map_err(|e| invalid("targets", e))?;
        self.agent.validate().map_err(|e| invalid("agent", e))?;
        self.weights.validate().map_err(|e| invalid("weights", e))?;
        self.detector.validate().map_err(|e| invalid("detector", e))?;
        validate_rules(&self.rules).map_err(|e| invalid("rules", e))?;
        if self.deployment.replicas < 1 || self.deployment.replicas > self.env.max_replicas {
            return Err(invalid("deployment", "replicas must be in [1, env.max_replicas]"));
        }
        if self.window_ms < 1 {
            return Err(invalid("window_ms", "must be >= 1"));
        }
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be >= 1"));
        }
        Ok(())
    }
}
