use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Association;
use crate::sim::AgentLimits;

/// Parameters of the demonstration learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Emission deviation, in units of the normalized feature.
    pub sigma: f64,
    /// Per-association deviations, keyed `primitive:target` or `primitive`.
    pub sigma_overrides: BTreeMap<String, f64>,
    /// Constant log-likelihood of the idle state.
    pub lambda_idle: f64,
    /// Grouping tolerance on interval endpoints (m).
    pub delta: f64,
    /// Widening applied to fitted intervals (m).
    pub margin: f64,
    /// Activation runs shorter than this many ticks are ignored.
    pub min_support: usize,
    /// Endpoints this close (m) to the extremes of the distance feature
    /// become unbounded.
    pub snap: f64,
    /// Emitted thresholds are rounded outward to this step (m).
    pub round: f64,
    /// Expected sample rate; a dataset at another rate is rejected.
    pub hz: Option<f64>,
    /// Motor models used for one-step prediction.
    pub limits: AgentLimits,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            sigma_overrides: BTreeMap::new(),
            lambda_idle: -0.5,
            delta: 0.3,
            margin: 0.05,
            min_support: 25,
            snap: 0.1,
            round: 0.01,
            hz: None,
            limits: AgentLimits::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading learner config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing learner config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0} must be positive")]
    NotPositive(String),
    #[error("{0} must not be negative")]
    Negative(&'static str),
}

impl LearnerConfig {
    pub fn sigma_for(&self, a: &Association) -> f64 {
        self.sigma_overrides
            .get(&a.to_string())
            .copied()
            .unwrap_or(self.sigma)
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sigma > 0.0) {
            return Err(ConfigError::NotPositive("sigma".into()));
        }
        if let Some((k, _)) = self.sigma_overrides.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(ConfigError::NotPositive(format!("sigma for {k}")));
        }
        if let Some(hz) = self.hz {
            if !(hz > 0.0) {
                return Err(ConfigError::NotPositive("hz".into()));
            }
        }
        if !(self.round > 0.0) {
            return Err(ConfigError::NotPositive("round".into()));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("margin", self.margin),
            ("snap", self.snap),
        ] {
            if v < 0.0 || v.is_nan() {
                return Err(ConfigError::Negative(name));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: LearnerConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
