//! Rater personas, attack scenarios, and the metrics that score how the
//! protocol's defenses held up.

pub mod metrics;
pub mod persona;
pub mod replay;
pub mod runner;
pub mod scenario;

pub use metrics::ScenarioMetrics;
pub use persona::{rating_matches, Quality, RaterCategory, RaterPersona};
pub use replay::{project, replay_verify, ReplayError};
pub use runner::{run_scenario, ScenarioRun};
pub use scenario::{AttackScenario, ScenarioError, ScenarioKind};
