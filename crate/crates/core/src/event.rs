//! Everything that can appear in the event log.
//!
//! Protocol events are appended by state transitions. Harness events are
//! annotations written by the scenario runner so a log can be replayed
//! into metrics without access to the simulator.

use serde::{Deserialize, Serialize};

use crate::adversary::{RaterCategory, Quality, ScenarioKind, ScenarioMetrics};
use crate::identity::{CardFingerprint, Role};
use crate::ids::{Address, ClaimId, Digest, ParticipantId, PurchaseId, ReviewId, ServiceId, TokenId};
use crate::ledger::GasOp;
use crate::review::{Badge, ClaimOutcome, RefundVote, Vote};
use crate::tokens::{SrdtPurpose, TokenKind};
use crate::wei::Wei;

/// Source of a gas payment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payer {
    Account(Address),
    /// Review submissions are paid from the service's review fund.
    ReviewFund(ServiceId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    Genesis {
        faucet: Address,
        supply: Wei,
        seed: u64,
    },
    Registered {
        participant: ParticipantId,
        address: Address,
        card: CardFingerprint,
        roles: Vec<Role>,
        grant: Wei,
    },
    AddressBound {
        participant: ParticipantId,
        address: Address,
    },
    Excluded {
        participant: ParticipantId,
        fraudulent_badges: u32,
        voided: Vec<TokenId>,
    },
    GasCharged {
        payer: Payer,
        op: GasOp,
        amount: Wei,
    },
    ServiceListed {
        service: ServiceId,
        provider: ParticipantId,
        s_cost: Wei,
        deposit: Wei,
    },
    ServiceRepriced {
        service: ServiceId,
        old_cost: Wei,
        new_cost: Wei,
    },
    ServiceWithdrawn {
        service: ServiceId,
        returned: Wei,
    },
    FundReplenished {
        service: ServiceId,
        provider: ParticipantId,
        amount: Wei,
        balance: Wei,
    },
    Purchased {
        purchase: PurchaseId,
        service: ServiceId,
        consumer: ParticipantId,
        provider: ParticipantId,
        price: Wei,
        discount_token: Option<TokenId>,
    },
    TokenMinted {
        token: TokenId,
        kind: TokenKind,
        holder: ParticipantId,
        service: ServiceId,
        purchase: Option<PurchaseId>,
        expiry_tick: u64,
    },
    SrdtConsumed {
        token: TokenId,
        holder: ParticipantId,
        purpose: SrdtPurpose,
    },
    ReviewSubmitted {
        review: ReviewId,
        purchase: PurchaseId,
        service: ServiceId,
        reviewer: ParticipantId,
        rating: u8,
        text_digest: Digest,
        srat: TokenId,
        subsidy: Wei,
    },
    Endorsed {
        review: ReviewId,
        service: ServiceId,
        endorser: ParticipantId,
        vote: Vote,
        srdt: TokenId,
    },
    Badged {
        review: ReviewId,
        service: ServiceId,
        reviewer: ParticipantId,
        badge: Badge,
        upvotes: u32,
        downvotes: u32,
    },
    RosterRebuilt {
        service: ServiceId,
        members: Vec<ParticipantId>,
        bootstrap: bool,
    },
    PenaltyRecorded {
        participant: ParticipantId,
        review: ReviewId,
        count: u32,
    },
    DretAwarded {
        provider: ParticipantId,
        service: ServiceId,
        total: u64,
    },
    TokensExpired {
        tokens: Vec<TokenId>,
    },
    RefundFiled {
        claim: ClaimId,
        purchase: PurchaseId,
        claimant: ParticipantId,
        panel: Vec<ParticipantId>,
    },
    RefundVoted {
        claim: ClaimId,
        voter: ParticipantId,
        vote: RefundVote,
    },
    RefundSettled {
        claim: ClaimId,
        outcome: ClaimOutcome,
        amount: Wei,
        from: Option<ParticipantId>,
        to: Option<ParticipantId>,
    },

    ScenarioStarted {
        name: String,
        kind: ScenarioKind,
        seed: u64,
        quorum: u32,
        penalty_threshold: u32,
    },
    GroundTruth {
        service: ServiceId,
        quality: Quality,
    },
    PersonaAssigned {
        participant: ParticipantId,
        category: RaterCategory,
        attacker: bool,
    },
    RegistrationAttempt {
        card: CardFingerprint,
        attacker: bool,
        whitewash: bool,
        participant: Option<ParticipantId>,
    },
    ActionRejected {
        actor: Option<ParticipantId>,
        action: String,
        error: String,
    },
    ScenarioFinished {
        metrics: ScenarioMetrics,
    },
}

impl Event {
    /// The `kind` string stored on the log record; matches the serde tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Genesis { .. } => "genesis",
            Event::Registered { .. } => "registered",
            Event::AddressBound { .. } => "address_bound",
            Event::Excluded { .. } => "excluded",
            Event::GasCharged { .. } => "gas_charged",
            Event::ServiceListed { .. } => "service_listed",
            Event::ServiceRepriced { .. } => "service_repriced",
            Event::ServiceWithdrawn { .. } => "service_withdrawn",
            Event::FundReplenished { .. } => "fund_replenished",
            Event::Purchased { .. } => "purchased",
            Event::TokenMinted { .. } => "token_minted",
            Event::SrdtConsumed { .. } => "srdt_consumed",
            Event::ReviewSubmitted { .. } => "review_submitted",
            Event::Endorsed { .. } => "endorsed",
            Event::Badged { .. } => "badged",
            Event::RosterRebuilt { .. } => "roster_rebuilt",
            Event::PenaltyRecorded { .. } => "penalty_recorded",
            Event::DretAwarded { .. } => "dret_awarded",
            Event::TokensExpired { .. } => "tokens_expired",
            Event::RefundFiled { .. } => "refund_filed",
            Event::RefundVoted { .. } => "refund_voted",
            Event::RefundSettled { .. } => "refund_settled",
            Event::ScenarioStarted { .. } => "scenario_started",
            Event::GroundTruth { .. } => "ground_truth",
            Event::PersonaAssigned { .. } => "persona_assigned",
            Event::RegistrationAttempt { .. } => "registration_attempt",
            Event::ActionRejected { .. } => "action_rejected",
            Event::ScenarioFinished { .. } => "scenario_finished",
        }
    }

    /// True for events written by the scenario harness rather than by a
    /// protocol transition.
    pub fn is_annotation(&self) -> bool {
        matches!(
            self,
            Event::ScenarioStarted { .. }
                | Event::GroundTruth { .. }
                | Event::PersonaAssigned { .. }
                | Event::RegistrationAttempt { .. }
                | Event::ActionRejected { .. }
                | Event::ScenarioFinished { .. }
        )
    }

    /// Parses a record payload and checks it agrees with the record kind.
    pub fn from_record(kind: &str, payload: &str) -> Result<Event, String> {
        let event: Event = serde_json::from_str(payload).map_err(|e| e.to_string())?;
        if event.kind() != kind {
            return Err(format!("kind {kind} does not match payload type {}", event.kind()));
        }
        Ok(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_matches_kind() {
        let e = Event::GasCharged {
            payer: Payer::ReviewFund(ServiceId(3)),
            op: GasOp::SubmitReview,
            amount: Wei(184_988_100_000_000),
        };
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.starts_with(r#"{"type":"gas_charged""#), "{json}");
        assert_eq!(Event::from_record("gas_charged", &json).unwrap(), e);
        assert!(Event::from_record("genesis", &json).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"type":"tokens_expired","tokens":[],"extra":1}"#;
        assert!(Event::from_record("tokens_expired", json).is_err());
    }
}
