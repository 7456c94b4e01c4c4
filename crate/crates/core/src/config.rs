//! Run configuration: one strict JSON document with every tunable.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackScenario, ScenarioError, ScenarioKind};
use crate::ledger::GasSchedule;
use crate::protocol::{ConfigError, ProtocolConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Exchange rate for the USD column of the gas table.
    pub usd_per_ether: f64,
    pub gas: GasSchedule,
    pub protocol: ProtocolConfig,
    pub scenarios: Vec<AttackScenario>,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            usd_per_ether: 1586.0,
            gas: GasSchedule::default(),
            protocol: ProtocolConfig::default(),
            scenarios: ScenarioKind::ALL.iter().map(|k| AttackScenario::preset(*k)).collect(),
            out_dir: "ddrm-out".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("usd_per_ether must be a positive finite number")]
    UsdRate,
    #[error(transparent)]
    Protocol(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario name {0:?} appears more than once")]
    DuplicateScenario(String),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), RunConfigError> {
        if !(self.usd_per_ether.is_finite() && self.usd_per_ether > 0.0) {
            return Err(RunConfigError::UsdRate);
        }
        self.protocol.validate(&self.gas)?;
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            s.validate()?;
            s.protocol(&self.protocol, &self.gas)?;
            if !names.insert(s.name.as_str()) {
                return Err(RunConfigError::DuplicateScenario(s.name.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"sed": 3}"#), Err(RunConfigError::Parse(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"protocol": {"quorum": 3, "extra": 1}}"#),
            Err(RunConfigError::Parse(_))
        ));
    }

    #[test]
    fn thresholds_must_be_positive() {
        let err = RunConfig::from_json(r#"{"protocol": {"panel_size": 0}}"#).unwrap_err();
        assert!(matches!(err, RunConfigError::Protocol(ConfigError::NotPositive("panel_size"))));
        assert!(matches!(RunConfig::from_json(r#"{"usd_per_ether": 0}"#), Err(RunConfigError::UsdRate)));
    }

    #[test]
    fn duplicate_scenarios_rejected() {
        let text = r#"{"scenarios": [{"name": "a"}, {"name": "a"}]}"#;
        assert!(matches!(RunConfig::from_json(text), Err(RunConfigError::DuplicateScenario(_))));
    }
}
