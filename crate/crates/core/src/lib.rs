//! Deterministic simulator for a decentralized drone-service reputation
//! protocol with consumable review tokens.
//!
//! A [`Ddrm`] instance owns an in-memory ledger (balances, gas, a seeded
//! random beacon and a hash-chained event log) and the protocol tables:
//! identities, service listings, tokens, reviews, endorsements and refund
//! claims. The [`adversary`] module drives attack scenarios against it and
//! recomputes their metrics from the exported log.

pub mod adversary;
pub mod config;
pub mod event;
pub mod identity;
pub mod ids;
pub mod ledger;
pub mod marketplace;
pub mod protocol;
pub mod report;
pub mod review;
pub mod tokens;
pub mod wei;

pub use adversary::{replay_verify, run_scenario, AttackScenario, ReplayError, ScenarioKind, ScenarioMetrics, ScenarioRun};
pub use config::{RunConfig, RunConfigError};
pub use event::Event;
pub use identity::{Role, ParticipantRecord};
pub use ids::{Address, ClaimId, ParticipantId, PurchaseId, ReviewId, ServiceId, TokenId};
pub use ledger::{EventRecord, GasOp, GasSchedule, RandomBeacon};
pub use protocol::{Caller, ConfigError, Ddrm, DdrmError, ProtocolConfig};
pub use review::{Badge, ClaimOutcome, Vote};
pub use wei::Wei;
