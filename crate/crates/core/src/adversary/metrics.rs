//! Scenario outcome metrics, computed live from simulator state.
//!
//! The replay module recomputes the same numbers from the event log alone;
//! the two must agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::persona::{rating_matches, Quality, RaterPersona};
use crate::ids::{ParticipantId, ServiceId};
use crate::protocol::Ddrm;
use crate::review::{Badge, ClaimOutcome};
use crate::wei::Wei;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMetrics {
    pub badged_reviews: u64,
    /// Authentic on a truthful review, or Fraudulent on an untruthful one.
    pub correctly_badged: u64,
    /// `correctly_badged / badged_reviews`, or 0 with nothing badged.
    pub badge_accuracy: f64,
    /// Everything debited from attacker accounts: gas, prices, deposits,
    /// fund top-ups and refunds paid.
    pub attacker_spend: Wei,
    /// Prices attackers paid to providers they do not control.
    pub attacker_payments_to_victims: Wei,
    /// Prices received by attacker-controlled providers.
    pub attacker_revenue: Wei,
    pub attacker_registrations_attempted: u64,
    pub attacker_registrations_succeeded: u64,
    pub whitewash_attempts: u64,
    pub whitewash_successes: u64,
    pub attacker_reviews_attempted: u64,
    pub attacker_reviews_accepted: u64,
    pub attacker_reviews_branded: u64,
    /// Dishonest reviews rated 1 or 2 on Good services with at least
    /// `quorum` votes.
    pub dishonest_negative_good_quorum: u64,
    pub dishonest_negative_good_branded: u64,
    pub honest_reviews_misbadged: u64,
    pub exclusions: u64,
    pub attacker_exclusions: u64,
    pub refund_claims: u64,
    /// Approved attacker claims against Good services.
    pub refund_fraud_approved: u64,
    pub provider_dret_delta: i64,
    /// DRET units earned by Bad services.
    pub undeserved_dret: u64,
    /// Largest dishonest fraction of any roster at the moment it was seated.
    pub peak_dishonest_roster_share: f64,
    pub defense_breached: bool,
}

impl ScenarioMetrics {
    /// Fills the fields derived from the raw counts.
    pub(crate) fn finish(mut self) -> Self {
        self.badge_accuracy = if self.badged_reviews == 0 {
            0.0
        } else {
            self.correctly_badged as f64 / self.badged_reviews as f64
        };
        self.defense_breached = self.honest_reviews_misbadged > 0
            || self.refund_fraud_approved > 0
            || self.whitewash_successes > 0
            || self.dishonest_negative_good_branded < self.dishonest_negative_good_quorum;
        self
    }
}

/// Harness-side counters that have no protocol state behind them.
#[derive(Debug, Clone, Default)]
pub(crate) struct LiveTally {
    pub registrations_attempted: u64,
    pub registrations_succeeded: u64,
    pub whitewash_attempts: u64,
    pub whitewash_successes: u64,
    pub attacker_review_rejections: u64,
    pub peak_share: f64,
}

pub(crate) fn dishonest_share(roster: &[ParticipantId], personas: &BTreeMap<ParticipantId, RaterPersona>) -> Option<f64> {
    if roster.is_empty() {
        return None;
    }
    let bad = roster.iter().filter(|p| personas.get(p).is_some_and(|x| !x.category.is_honest())).count();
    Some(bad as f64 / roster.len() as f64)
}

pub(crate) fn collect(
    sim: &Ddrm,
    personas: &BTreeMap<ParticipantId, RaterPersona>,
    ground: &BTreeMap<ServiceId, Quality>,
    tally: &LiveTally,
) -> ScenarioMetrics {
    let attacker = |p: ParticipantId| personas.get(&p).is_some_and(|x| x.attacker);
    let dishonest = |p: ParticipantId| personas.get(&p).is_some_and(|x| !x.category.is_honest());
    let quality = |s: ServiceId| ground.get(&s).copied().unwrap_or(Quality::Good);
    let quorum = sim.config().quorum;
    let mut m = ScenarioMetrics::default();

    for r in sim.reviews().reviews() {
        let truthful = rating_matches(r.rating, quality(r.service));
        if r.badge != Badge::Pending {
            m.badged_reviews += 1;
            if (r.badge == Badge::Authentic) == truthful {
                m.correctly_badged += 1;
            }
        }
        let fraudulent = r.badge == Badge::Fraudulent;
        if attacker(r.reviewer) {
            m.attacker_reviews_accepted += 1;
            m.attacker_reviews_branded += fraudulent as u64;
        }
        if dishonest(r.reviewer) && r.rating <= 2 && quality(r.service) == Quality::Good && r.votes() >= quorum {
            m.dishonest_negative_good_quorum += 1;
            m.dishonest_negative_good_branded += fraudulent as u64;
        }
        if !dishonest(r.reviewer) && fraudulent {
            m.honest_reviews_misbadged += 1;
        }
    }

    let mut spend = Wei::ZERO;
    for p in sim.registry().participants().iter().filter(|p| attacker(p.id)) {
        spend = spend.checked_add(sim.ledger().outflow(p.wallet())).expect("bounded by supply");
    }
    m.attacker_spend = spend;
    let market = sim.market();
    let provider_of = |s: ServiceId| market.service(s).expect("purchased service exists").provider;
    for b in market.purchases() {
        let provider = provider_of(b.service);
        if attacker(b.consumer) && !attacker(provider) {
            m.attacker_payments_to_victims = m.attacker_payments_to_victims.checked_add(b.price_paid).expect("bounded");
        }
        if attacker(provider) {
            m.attacker_revenue = m.attacker_revenue.checked_add(b.price_paid).expect("bounded");
        }
    }

    m.attacker_registrations_attempted = tally.registrations_attempted;
    m.attacker_registrations_succeeded = tally.registrations_succeeded;
    m.whitewash_attempts = tally.whitewash_attempts;
    m.whitewash_successes = tally.whitewash_successes;
    m.attacker_reviews_attempted = m.attacker_reviews_accepted + tally.attacker_review_rejections;

    for p in sim.registry().participants().iter().filter(|p| !p.is_active()) {
        m.exclusions += 1;
        m.attacker_exclusions += attacker(p.id) as u64;
    }

    for c in sim.reviews().claims() {
        m.refund_claims += 1;
        if c.outcome == ClaimOutcome::Approved && attacker(c.claimant) && quality(c.service) == Quality::Good {
            m.refund_fraud_approved += 1;
        }
    }

    m.provider_dret_delta = sim.tokens().dret_total() as i64;
    let k = sim.config().dret_k;
    m.undeserved_dret = market
        .services()
        .iter()
        .filter(|s| quality(s.id) == Quality::Bad)
        .map(|s| s.authentic_review_count / k)
        .sum();
    m.peak_dishonest_roster_share = tally.peak_share;
    m.finish()
}
