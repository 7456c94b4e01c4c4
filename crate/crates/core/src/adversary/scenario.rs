//! Attack scenario definitions.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ledger::GasSchedule;
use crate::protocol::{ConfigError, ProtocolConfig};
use crate::wei::Wei;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Many registrations behind one card per attacker.
    Sybil,
    /// Self-listing attacker buys and praises its own Bad service.
    BallotStuffing,
    /// Attackers buy a Good service and rate it 1.
    BadMouthing,
    /// A ring praising a Bad service, voting for each other once seated.
    Collusion,
    /// Bad-mouthers who try to re-register after exclusion.
    Whitewashing,
    /// Attackers who review without ever purchasing.
    ConstantAttack,
    /// Attackers review first so the bootstrap draw seats them as a
    /// roster majority.
    MajorityEndorser,
    /// Attackers buy Good services and file refund claims.
    FalseRefund,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Sybil,
        ScenarioKind::BallotStuffing,
        ScenarioKind::BadMouthing,
        ScenarioKind::Collusion,
        ScenarioKind::Whitewashing,
        ScenarioKind::ConstantAttack,
        ScenarioKind::MajorityEndorser,
        ScenarioKind::FalseRefund,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Sybil => "sybil",
            ScenarioKind::BallotStuffing => "ballot_stuffing",
            ScenarioKind::BadMouthing => "bad_mouthing",
            ScenarioKind::Collusion => "collusion",
            ScenarioKind::Whitewashing => "whitewashing",
            ScenarioKind::ConstantAttack => "constant_attack",
            ScenarioKind::MajorityEndorser => "majority_endorser",
            ScenarioKind::FalseRefund => "false_refund",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("scenario {name}: {source}")]
    Config { name: String, source: ConfigError },
    #[error("scenario {name}: invariant violated: {message}")]
    Invariant { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackScenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub attacker_count: usize,
    /// Registration attempts per attacker, all behind the attacker's card.
    pub fake_identities_per_attacker: usize,
    pub rounds: u32,
    /// Overrides the run seed when set.
    pub seed: Option<u64>,
    pub happy_honest: usize,
    pub unhappy_honest: usize,
    pub good_services: usize,
    pub bad_services: usize,
    /// Ballot stuffing: total fake purchases and reviews per attacker.
    pub fake_reviews: usize,
    pub honest_vote_probability: f64,
    pub purchase_probability: f64,
    pub service_cost: Wei,
    pub attack_start_round: u32,
    /// Protocol parameter overrides, keyed like the protocol config.
    pub overrides: Map<String, Value>,
}

impl Default for AttackScenario {
    fn default() -> Self {
        AttackScenario {
            name: "bad_mouthing".into(),
            kind: ScenarioKind::BadMouthing,
            attacker_count: 3,
            fake_identities_per_attacker: 1,
            rounds: 30,
            seed: None,
            happy_honest: 30,
            unhappy_honest: 10,
            good_services: 3,
            bad_services: 2,
            fake_reviews: 150,
            honest_vote_probability: 1.0,
            purchase_probability: 0.5,
            service_cost: Wei::milli_ether(20),
            attack_start_round: 2,
            overrides: Map::new(),
        }
    }
}

impl AttackScenario {
    /// A ready-to-run scenario of `kind` at desk scale.
    pub fn preset(kind: ScenarioKind) -> Self {
        let mut s = AttackScenario { name: kind.name().into(), kind, ..Default::default() };
        match kind {
            ScenarioKind::Sybil => {
                s.fake_identities_per_attacker = 5;
            }
            ScenarioKind::BallotStuffing => {
                s.attacker_count = 1;
                s.attack_start_round = 0;
            }
            ScenarioKind::Collusion => {
                s.attacker_count = 5;
                s.attack_start_round = 0;
            }
            ScenarioKind::Whitewashing => {
                s.rounds = 40;
            }
            ScenarioKind::MajorityEndorser => {
                s.attacker_count = 7;
                s.attack_start_round = 0;
                s.overrides.insert("bootstrap_window".into(), Value::from(8));
            }
            ScenarioKind::FalseRefund => {
                s.attacker_count = 4;
            }
            ScenarioKind::BadMouthing | ScenarioKind::ConstantAttack => {}
        }
        s
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid { name: self.name.clone(), message: message.into() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(self.invalid("name must be non-empty ASCII letters, digits, '_' or '-'"));
        }
        if self.rounds == 0 {
            return Err(self.invalid("rounds must be positive"));
        }
        if self.fake_identities_per_attacker == 0 {
            return Err(self.invalid("fake_identities_per_attacker must be positive"));
        }
        for (label, p) in [
            ("honest_vote_probability", self.honest_vote_probability),
            ("purchase_probability", self.purchase_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(self.invalid(format!("{label} must lie in [0, 1]")));
            }
        }
        if self.service_cost.is_zero() {
            return Err(self.invalid("service_cost must be positive"));
        }
        Ok(())
    }

    /// Applies `overrides` to `base` and validates the result.
    pub fn protocol(&self, base: &ProtocolConfig, gas: &GasSchedule) -> Result<ProtocolConfig, ScenarioError> {
        let mut merged = serde_json::to_value(base).expect("config serializes");
        let fields = merged.as_object_mut().expect("config is an object");
        for (k, v) in &self.overrides {
            fields.insert(k.clone(), v.clone());
        }
        let cfg: ProtocolConfig =
            serde_json::from_value(merged).map_err(|e| self.invalid(format!("overrides: {e}")))?;
        cfg.validate(gas).map_err(|source| ScenarioError::Config { name: self.name.clone(), source })?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for kind in ScenarioKind::ALL {
            let s = AttackScenario::preset(kind);
            s.validate().unwrap();
            s.protocol(&ProtocolConfig::default(), &GasSchedule::default()).unwrap();
            assert_eq!(s.name, kind.name());
        }
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let s = AttackScenario::preset(ScenarioKind::MajorityEndorser);
        let cfg = s.protocol(&ProtocolConfig::default(), &GasSchedule::default()).unwrap();
        assert_eq!(cfg.bootstrap_window, 8);

        let mut bad = s.clone();
        bad.overrides.insert("no_such_knob".into(), Value::from(1));
        assert!(matches!(
            bad.protocol(&ProtocolConfig::default(), &GasSchedule::default()),
            Err(ScenarioError::Invalid { .. })
        ));
        let mut zero = s;
        zero.overrides.insert("quorum".into(), Value::from(0));
        assert!(matches!(
            zero.protocol(&ProtocolConfig::default(), &GasSchedule::default()),
            Err(ScenarioError::Config { .. })
        ));
    }

    #[test]
    fn scenario_json_is_strict() {
        let ok: AttackScenario = serde_json::from_str(r#"{"name":"x","kind":"sybil","rounds":3}"#).unwrap();
        assert_eq!(ok.rounds, 3);
        assert!(serde_json::from_str::<AttackScenario>(r#"{"name":"x","bogus":1}"#).is_err());
        let bad = AttackScenario { purchase_probability: 1.5, ..ok };
        assert!(bad.validate().is_err());
    }
}
