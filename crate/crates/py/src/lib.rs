//! Python bindings: the protocol state machine, scenario runs, log
//! verification and the gas table.
//!
//! Amounts cross the boundary as Python ints in Wei. Ids are plain ints.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::Value;

use ddrm_core::identity::CardFingerprint;
use ddrm_core::ids::{ClaimId, Digest, ReviewId};
use ddrm_core::ledger::parse_ndjson;
use ddrm_core::review::RefundVote;
use ddrm_core::{
    replay_verify, run_scenario as core_run_scenario, AttackScenario, Ddrm, DdrmError, GasSchedule, ParticipantId,
    ProtocolConfig, PurchaseId, Role, RunConfig, ScenarioKind, ServiceId, Vote, Wei,
};

create_exception!(ddrm, ProtocolError, PyException, "A protocol operation was rejected.");

fn err(e: DdrmError) -> PyErr {
    ProtocolError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_name<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(Value::String(name.to_string())).map_err(|_| value_err(format!("unknown name {name:?}")))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

/// A protocol instance with its own ledger and event log.
#[pyclass(name = "Simulator")]
struct PySimulator {
    inner: Ddrm,
}

#[pymethods]
impl PySimulator {
    /// `config` is a protocol config as JSON; omitted keys take defaults.
    #[new]
    #[pyo3(signature = (seed=0, config=None, audit=true))]
    fn new(seed: u64, config: Option<&str>, audit: bool) -> PyResult<Self> {
        let cfg: ProtocolConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(value_err)?,
            None => ProtocolConfig::default(),
        };
        let mut inner = Ddrm::new(cfg, GasSchedule::default(), seed).map_err(value_err)?;
        inner.set_audit(audit);
        Ok(PySimulator { inner })
    }

    /// Roles are `service_provider`, `consumer`, `reviewer`, `endorser`.
    fn register(&mut self, card: &str, roles: Vec<String>) -> PyResult<u64> {
        let roles = roles.iter().map(|r| parse_name::<Role>(r)).collect::<PyResult<Vec<_>>>()?;
        Ok(self.inner.register(CardFingerprint::from_card(card), &roles).map_err(err)?.0)
    }

    fn balance(&self, participant: u64) -> PyResult<u128> {
        Ok(self.inner.balance(ParticipantId(participant)).map_err(err)?.value())
    }

    fn add_service(&mut self, provider: u64, s_cost: u128) -> PyResult<u64> {
        Ok(self.inner.add_service(ParticipantId(provider), Wei(s_cost)).map_err(err)?.0)
    }

    fn modify_service(&mut self, provider: u64, service: u64, s_cost: u128) -> PyResult<()> {
        self.inner.modify_service(ParticipantId(provider), ServiceId(service), Wei(s_cost)).map_err(err)
    }

    fn withdraw_service(&mut self, provider: u64, service: u64) -> PyResult<()> {
        self.inner.withdraw_service(ParticipantId(provider), ServiceId(service)).map_err(err)
    }

    fn replenish_fund(&mut self, provider: u64, service: u64, amount: u128) -> PyResult<u128> {
        let fund = self.inner.replenish_fund(ParticipantId(provider), ServiceId(service), Wei(amount)).map_err(err)?;
        Ok(fund.value())
    }

    fn review_fund(&self, service: u64) -> PyResult<u128> {
        let s = self.inner.market().service(ServiceId(service)).ok_or_else(|| err(DdrmError::UnknownService(ServiceId(service))))?;
        Ok(s.review_fund.value())
    }

    fn buy_service(&mut self, consumer: u64, service: u64) -> PyResult<u64> {
        Ok(self.inner.buy_service(ParticipantId(consumer), ServiceId(service)).map_err(err)?.0)
    }

    fn submit_review(&mut self, reviewer: u64, purchase: u64, rating: u8, text: &str) -> PyResult<u64> {
        let digest = Digest::of(text.as_bytes());
        Ok(self.inner.submit_review(ParticipantId(reviewer), PurchaseId(purchase), rating, digest).map_err(err)?.0)
    }

    /// Casts an endorsement vote; returns the consumed SRDT id.
    fn endorse_review(&mut self, endorser: u64, review: u64, up: bool) -> PyResult<u64> {
        let vote = if up { Vote::Up } else { Vote::Down };
        Ok(self.inner.endorse_review(ParticipantId(endorser), ReviewId(review), vote).map_err(err)?.0)
    }

    fn bootstrap_endorsers(&mut self, service: u64, n: usize) -> PyResult<Vec<u64>> {
        let drawn = self.inner.bootstrap_endorsers(ServiceId(service), n).map_err(err)?;
        Ok(drawn.into_iter().map(|p| p.0).collect())
    }

    /// Returns the selection report as JSON.
    fn run_endorser_selection(&mut self, service: u64) -> PyResult<String> {
        Ok(json(&self.inner.run_endorser_selection(ServiceId(service)).map_err(err)?))
    }

    fn badge(&self, review: u64) -> PyResult<String> {
        let r = self.inner.reviews().review(ReviewId(review)).ok_or_else(|| err(DdrmError::UnknownReview(ReviewId(review))))?;
        Ok(json(&r.badge).trim_matches('"').to_string())
    }

    fn roster(&self, service: u64) -> Vec<u64> {
        self.inner.reviews().roster(ServiceId(service)).into_iter().map(|p| p.0).collect()
    }

    fn file_refund_claim(&mut self, consumer: u64, purchase: u64) -> PyResult<u64> {
        Ok(self.inner.file_refund_claim(ParticipantId(consumer), PurchaseId(purchase)).map_err(err)?.0)
    }

    fn claim_panel(&self, claim: u64) -> PyResult<Vec<u64>> {
        let c = self.inner.reviews().claim(ClaimId(claim)).ok_or_else(|| err(DdrmError::UnknownClaim(ClaimId(claim))))?;
        Ok(c.panel.iter().map(|p| p.0).collect())
    }

    fn vote_refund(&mut self, voter: u64, claim: u64, approve: bool) -> PyResult<()> {
        let vote = if approve { RefundVote::Approve } else { RefundVote::Reject };
        self.inner.vote_refund(ParticipantId(voter), ClaimId(claim), vote).map_err(err)
    }

    /// Returns `approved` or `rejected`.
    fn settle_refund(&mut self, claim: u64) -> PyResult<String> {
        let outcome = self.inner.settle_refund(ClaimId(claim)).map_err(err)?;
        Ok(json(&outcome).trim_matches('"').to_string())
    }

    fn advance_tick(&mut self) -> u64 {
        self.inner.advance_tick()
    }

    #[getter]
    fn tick(&self) -> u64 {
        self.inner.tick()
    }

    fn check_conservation(&self) -> PyResult<()> {
        self.inner.check_conservation().map_err(err)
    }

    fn head_hash(&self) -> String {
        self.inner.ledger().head_hash().to_hex()
    }

    fn events_ndjson(&self) -> String {
        self.inner.ledger().log().to_ndjson()
    }

    fn __len__(&self) -> usize {
        self.inner.ledger().log().len()
    }
}

/// Runs a preset scenario by kind name, optionally with fewer or more
/// rounds. Returns `(metrics_json, log_ndjson)`.
#[pyfunction]
#[pyo3(signature = (kind, seed=1, rounds=None))]
fn run_scenario(kind: &str, seed: u64, rounds: Option<u32>) -> PyResult<(String, String)> {
    let mut sc = AttackScenario::preset(parse_name::<ScenarioKind>(kind)?);
    if let Some(rounds) = rounds {
        sc.rounds = rounds;
    }
    let run = core_run_scenario(&sc, &ProtocolConfig::default(), &GasSchedule::default(), seed).map_err(value_err)?;
    Ok((json(&run.metrics), run.to_ndjson()))
}

/// Verifies a log's hash chain and replays its metrics; returns them as JSON.
#[pyfunction]
fn verify_log(ndjson: &str) -> PyResult<String> {
    let records = parse_ndjson(ndjson).map_err(value_err)?;
    Ok(json(&replay_verify(&records).map_err(value_err)?))
}

/// The gas-cost table as `(caller, function, gas_limit, gas_used, gwei, ether, usd)` rows.
#[pyfunction]
#[pyo3(signature = (usd_per_ether=1586.0))]
fn gas_table(usd_per_ether: f64) -> Vec<(String, String, u64, u64, String, String, String)> {
    ddrm_core::report::gas_table(&GasSchedule::default(), usd_per_ether)
        .into_iter()
        .map(|r| (r.caller, r.function_name, r.gas_limit, r.gas_used, r.gas_price_gwei, r.total_ether, r.total_usd))
        .collect()
}

#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_json_pretty()
}

#[pymodule]
fn ddrm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify_log, m)?)?;
    m.add_function(wrap_pyfunction!(gas_table, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("ProtocolError", m.py().get_type::<ProtocolError>())?;
    m.add("WEI_PER_ETHER", ddrm_core::wei::WEI_PER_ETHER)?;
    Ok(())
}
