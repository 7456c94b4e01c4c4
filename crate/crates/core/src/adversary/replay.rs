//! Recomputes scenario metrics from an exported event log alone.
//!
//! Nothing here touches simulator state; the log is the only input. A
//! completed scenario log ends with a `scenario_finished` record carrying
//! the live metrics, and replay must reproduce them exactly.

use std::collections::BTreeMap;

use super::metrics::ScenarioMetrics;
use super::persona::{rating_matches, Quality, RaterCategory};
use crate::event::{Event, Payer};
use crate::ids::{Address, ClaimId, ParticipantId, PurchaseId, ReviewId, ServiceId};
use crate::ledger::{verify_chain, EventRecord};
use crate::review::{Badge, ClaimOutcome, Vote};
use crate::wei::Wei;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("chain broken at seq {seq}: {reason}")]
    ChainBroken { seq: u64, reason: String },
    #[error("malformed event at seq {seq}: {message}")]
    MalformedEvent { seq: u64, message: String },
    #[error("replayed metrics differ from recorded metrics")]
    Mismatch { recorded: Box<ScenarioMetrics>, replayed: Box<ScenarioMetrics> },
}

#[derive(Debug)]
struct ReviewRow {
    reviewer: ParticipantId,
    service: ServiceId,
    rating: u8,
    up: u32,
    down: u32,
    badge: Badge,
}

#[derive(Debug, Default)]
struct Projection {
    quorum: u32,
    ground: BTreeMap<ServiceId, Quality>,
    personas: BTreeMap<ParticipantId, (RaterCategory, bool)>,
    owners: BTreeMap<Address, ParticipantId>,
    providers: BTreeMap<ServiceId, ParticipantId>,
    purchases: BTreeMap<PurchaseId, (ServiceId, ParticipantId)>,
    reviews: BTreeMap<ReviewId, ReviewRow>,
    claims: BTreeMap<ClaimId, PurchaseId>,
    m: ScenarioMetrics,
}

fn add(total: &mut Wei, amount: Wei, seq: u64) -> Result<(), ReplayError> {
    *total = total
        .checked_add(amount)
        .ok_or(ReplayError::MalformedEvent { seq, message: "amount overflow".into() })?;
    Ok(())
}

impl Projection {
    fn attacker(&self, p: ParticipantId) -> bool {
        self.personas.get(&p).is_some_and(|(_, a)| *a)
    }

    fn dishonest(&self, p: ParticipantId) -> bool {
        self.personas.get(&p).is_some_and(|(c, _)| !c.is_honest())
    }

    fn quality(&self, s: ServiceId) -> Quality {
        self.ground.get(&s).copied().unwrap_or(Quality::Good)
    }

    fn apply(&mut self, seq: u64, event: Event) -> Result<(), ReplayError> {
        let malformed = |message: &str| ReplayError::MalformedEvent { seq, message: message.into() };
        match event {
            Event::ScenarioStarted { quorum, .. } => self.quorum = quorum,
            Event::GroundTruth { service, quality } => {
                self.ground.insert(service, quality);
            }
            Event::PersonaAssigned { participant, category, attacker } => {
                self.personas.insert(participant, (category, attacker));
            }
            Event::RegistrationAttempt { attacker: true, whitewash, participant, .. } => {
                let ok = participant.is_some() as u64;
                if whitewash {
                    self.m.whitewash_attempts += 1;
                    self.m.whitewash_successes += ok;
                } else {
                    self.m.attacker_registrations_attempted += 1;
                    self.m.attacker_registrations_succeeded += ok;
                }
            }
            Event::Registered { participant, address, .. } | Event::AddressBound { participant, address } => {
                self.owners.insert(address, participant);
            }
            Event::GasCharged { payer: Payer::Account(addr), amount, .. } => {
                if self.owners.get(&addr).is_some_and(|p| self.attacker(*p)) {
                    add(&mut self.m.attacker_spend, amount, seq)?;
                }
            }
            Event::ServiceListed { service, provider, deposit, .. } => {
                self.providers.insert(service, provider);
                if self.attacker(provider) {
                    add(&mut self.m.attacker_spend, deposit, seq)?;
                }
            }
            Event::FundReplenished { provider, amount, .. } => {
                if self.attacker(provider) {
                    add(&mut self.m.attacker_spend, amount, seq)?;
                }
            }
            Event::Purchased { purchase, service, consumer, provider, price, .. } => {
                self.purchases.insert(purchase, (service, consumer));
                if self.attacker(consumer) {
                    add(&mut self.m.attacker_spend, price, seq)?;
                    if !self.attacker(provider) {
                        add(&mut self.m.attacker_payments_to_victims, price, seq)?;
                    }
                }
                if self.attacker(provider) {
                    add(&mut self.m.attacker_revenue, price, seq)?;
                }
            }
            Event::ReviewSubmitted { review, service, reviewer, rating, .. } => {
                self.reviews.insert(review, ReviewRow { reviewer, service, rating, up: 0, down: 0, badge: Badge::Pending });
            }
            Event::Endorsed { review, vote, .. } => {
                let row = self.reviews.get_mut(&review).ok_or_else(|| malformed("vote on unknown review"))?;
                match vote {
                    Vote::Up => row.up += 1,
                    Vote::Down => row.down += 1,
                }
            }
            Event::Badged { review, badge, .. } => {
                let row = self.reviews.get_mut(&review).ok_or_else(|| malformed("badge on unknown review"))?;
                row.badge = badge;
            }
            Event::RosterRebuilt { members, .. } => {
                if !members.is_empty() {
                    let bad = members.iter().filter(|p| self.dishonest(**p)).count();
                    let share = bad as f64 / members.len() as f64;
                    if share > self.m.peak_dishonest_roster_share {
                        self.m.peak_dishonest_roster_share = share;
                    }
                }
            }
            Event::Excluded { participant, .. } => {
                self.m.exclusions += 1;
                self.m.attacker_exclusions += self.attacker(participant) as u64;
            }
            Event::DretAwarded { service, .. } => {
                self.m.provider_dret_delta += 1;
                self.m.undeserved_dret += (self.quality(service) == Quality::Bad) as u64;
            }
            Event::RefundFiled { claim, purchase, .. } => {
                self.m.refund_claims += 1;
                self.claims.insert(claim, purchase);
            }
            Event::RefundSettled { claim, outcome, amount, from, .. } => {
                if outcome == ClaimOutcome::Approved {
                    if from.is_some_and(|p| self.attacker(p)) {
                        add(&mut self.m.attacker_spend, amount, seq)?;
                    }
                    let purchase = self.claims.get(&claim).ok_or_else(|| malformed("settled unknown claim"))?;
                    let (service, consumer) =
                        *self.purchases.get(purchase).ok_or_else(|| malformed("claim on unknown purchase"))?;
                    if self.attacker(consumer) && self.quality(service) == Quality::Good {
                        self.m.refund_fraud_approved += 1;
                    }
                }
            }
            Event::ActionRejected { actor: Some(actor), action, .. }
                if action == "submit_review" && self.attacker(actor) =>
            {
                self.m.attacker_reviews_attempted += 1;
            }
            _ => {}
        }
        Ok(())
    }

    fn finish(mut self) -> ScenarioMetrics {
        for row in self.reviews.values() {
            let quality = self.quality(row.service);
            let truthful = rating_matches(row.rating, quality);
            let fraudulent = row.badge == Badge::Fraudulent;
            if row.badge != Badge::Pending {
                self.m.badged_reviews += 1;
                self.m.correctly_badged += ((row.badge == Badge::Authentic) == truthful) as u64;
            }
            if self.attacker(row.reviewer) {
                self.m.attacker_reviews_accepted += 1;
                self.m.attacker_reviews_attempted += 1;
                self.m.attacker_reviews_branded += fraudulent as u64;
            }
            if self.dishonest(row.reviewer)
                && row.rating <= 2
                && quality == Quality::Good
                && row.up + row.down >= self.quorum
            {
                self.m.dishonest_negative_good_quorum += 1;
                self.m.dishonest_negative_good_branded += fraudulent as u64;
            }
            if !self.dishonest(row.reviewer) && fraudulent {
                self.m.honest_reviews_misbadged += 1;
            }
        }
        self.m.finish()
    }
}

/// Projects metrics from `records` without checking them against the
/// embedded result. The chain must already be verified.
pub fn project(records: &[EventRecord]) -> Result<ScenarioMetrics, ReplayError> {
    let mut p = Projection::default();
    for r in records {
        let event = Event::from_record(&r.kind, &r.payload)
            .map_err(|message| ReplayError::MalformedEvent { seq: r.seq, message })?;
        if matches!(event, Event::ScenarioFinished { .. }) {
            continue;
        }
        p.apply(r.seq, event)?;
    }
    Ok(p.finish())
}

/// Verifies the hash chain, replays the log into metrics and checks them
/// against the metrics recorded at the end of the run. An empty log
/// yields zero metrics.
pub fn replay_verify(records: &[EventRecord]) -> Result<ScenarioMetrics, ReplayError> {
    verify_chain(records).map_err(|b| ReplayError::ChainBroken { seq: b.seq, reason: b.reason.to_string() })?;
    let Some(last) = records.last() else {
        return Ok(ScenarioMetrics::default());
    };
    let recorded = match Event::from_record(&last.kind, &last.payload) {
        Ok(Event::ScenarioFinished { metrics }) => metrics,
        Ok(_) => {
            return Err(ReplayError::ChainBroken {
                seq: last.seq + 1,
                reason: "log ends before the scenario finished".into(),
            })
        }
        Err(message) => return Err(ReplayError::MalformedEvent { seq: last.seq, message }),
    };
    if let Some(r) = records[..records.len() - 1].iter().find(|r| r.kind == "scenario_finished") {
        return Err(ReplayError::MalformedEvent { seq: r.seq, message: "scenario finished twice".into() });
    }
    let replayed = project(records)?;
    if replayed != recorded {
        return Err(ReplayError::Mismatch { recorded: Box::new(recorded), replayed: Box::new(replayed) });
    }
    Ok(replayed)
}
