//! Reviews, endorsement votes, endorser rosters and refund adjudication.
//!
//! A review starts `Pending` and is badged only inside
//! [`Ddrm::run_endorser_selection`], once it has at least `quorum` votes.
//! Each service keeps a cumulative pool of endorser candidates: bootstrap
//! draws and Authentic reviewers join it, penalized reviewers leave it.
//! Every selection round clears the roster and reseats the whole pool,
//! handing each member one SRDT.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::event::{Event, Payer};
use crate::identity::Role;
use crate::ids::{ClaimId, Digest, ParticipantId, PurchaseId, ReviewId, ServiceId, TokenId};
use crate::ledger::GasOp;
use crate::protocol::{Caller, Ddrm, DdrmError, Result};
use crate::tokens::SrdtPurpose;
use crate::wei::Wei;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Badge {
    Pending,
    Authentic,
    Fraudulent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefundVote {
    Approve,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimOutcome {
    Open,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: ReviewId,
    pub service: ServiceId,
    pub reviewer: ParticipantId,
    pub purchase: PurchaseId,
    pub rating: u8,
    pub text_digest: Digest,
    pub upvotes: u32,
    pub downvotes: u32,
    pub badge: Badge,
    pub tick: u64,
}

impl Review {
    pub fn votes(&self) -> u32 {
        self.upvotes + self.downvotes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsementAnnotation {
    pub endorser: ParticipantId,
    pub review: ReviewId,
    pub service: ServiceId,
    pub vote: Vote,
    pub tick: u64,
    pub srdt: TokenId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefundClaim {
    pub id: ClaimId,
    pub purchase: PurchaseId,
    pub service: ServiceId,
    pub claimant: ParticipantId,
    pub provider: ParticipantId,
    pub panel: Vec<ParticipantId>,
    pub votes: BTreeMap<ParticipantId, RefundVote>,
    pub outcome: ClaimOutcome,
    pub tick: u64,
}

impl RefundClaim {
    pub fn approvals(&self) -> usize {
        self.votes.values().filter(|v| **v == RefundVote::Approve).count()
    }
}

/// What one selection round did.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionReport {
    pub service: ServiceId,
    pub badged: Vec<(ReviewId, Badge)>,
    pub penalized: Vec<ParticipantId>,
    pub excluded: Vec<ParticipantId>,
    /// Roster after the round (unchanged if nothing was eligible).
    pub roster: Vec<ParticipantId>,
    pub rebuilt: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReviewBook {
    reviews: Vec<Review>,
    annotations: Vec<EndorsementAnnotation>,
    voted: BTreeSet<(ParticipantId, ReviewId)>,
    rosters: BTreeMap<ServiceId, BTreeSet<ParticipantId>>,
    pools: BTreeMap<ServiceId, BTreeSet<ParticipantId>>,
    /// Reviewers of each service in submission order.
    service_reviewers: BTreeMap<ServiceId, Vec<ParticipantId>>,
    penalties: BTreeMap<ParticipantId, u32>,
    claims: Vec<RefundClaim>,
    claims_by_purchase: BTreeMap<PurchaseId, ClaimId>,
}

impl ReviewBook {
    pub fn review(&self, id: ReviewId) -> Option<&Review> {
        self.reviews.get(id.index())
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn reviews_for(&self, service: ServiceId) -> impl Iterator<Item = &Review> {
        self.reviews.iter().filter(move |r| r.service == service)
    }

    pub fn annotations(&self) -> &[EndorsementAnnotation] {
        &self.annotations
    }

    pub fn has_endorsed(&self, endorser: ParticipantId, review: ReviewId) -> bool {
        self.voted.contains(&(endorser, review))
    }

    pub fn roster(&self, service: ServiceId) -> Vec<ParticipantId> {
        self.rosters.get(&service).map(|r| r.iter().copied().collect()).unwrap_or_default()
    }

    pub fn is_selected(&self, endorser: ParticipantId, service: ServiceId) -> bool {
        self.rosters.get(&service).is_some_and(|r| r.contains(&endorser))
    }

    pub fn candidate_pool(&self, service: ServiceId) -> Vec<ParticipantId> {
        self.pools.get(&service).map(|r| r.iter().copied().collect()).unwrap_or_default()
    }

    pub fn service_reviewers(&self, service: ServiceId) -> &[ParticipantId] {
        self.service_reviewers.get(&service).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn fraudulent_count(&self, participant: ParticipantId) -> u32 {
        self.penalties.get(&participant).copied().unwrap_or(0)
    }

    pub fn claim(&self, id: ClaimId) -> Option<&RefundClaim> {
        self.claims.get(id.index())
    }

    pub fn claims(&self) -> &[RefundClaim] {
        &self.claims
    }

    pub fn claim_for_purchase(&self, purchase: PurchaseId) -> Option<&RefundClaim> {
        self.claims_by_purchase.get(&purchase).and_then(|id| self.claim(*id))
    }

    pub fn is_seated_anywhere(&self, participant: ParticipantId) -> bool {
        self.rosters.values().any(|r| r.contains(&participant))
    }

    pub(crate) fn remove_endorser(&mut self, participant: ParticipantId) {
        for r in self.rosters.values_mut() {
            r.remove(&participant);
        }
        for p in self.pools.values_mut() {
            p.remove(&participant);
        }
    }
}

impl Ddrm {
    /// Submits a review for a purchase, burning its SRAT. The review fund
    /// pays the submission gas.
    pub fn submit_review(
        &mut self,
        who: impl Into<Caller>,
        purchase: PurchaseId,
        rating: u8,
        text_digest: Digest,
    ) -> Result<ReviewId> {
        let (pid, _) = self.active(who.into())?;
        let record = self.market.purchase(purchase).filter(|p| p.consumer == pid);
        let record = record.ok_or(DdrmError::NoPurchase(purchase))?;
        if record.reviewed {
            return Err(DdrmError::AlreadyReviewed(purchase));
        }
        let tick = self.ledger.tick();
        let srat = self.tokens.srat_for_purchase(purchase).ok_or(DdrmError::NoValidSrat(purchase))?.id;
        self.tokens.check_srat(srat, tick).map_err(|_| DdrmError::NoValidSrat(purchase))?;
        if !(1..=5).contains(&rating) {
            return Err(DdrmError::InvalidRating(rating));
        }
        let service = record.service;
        let listing = self.market.service(service).expect("purchase references a service");
        if !listing.is_listed() {
            return Err(DdrmError::ServiceWithdrawn(service));
        }
        let subsidy = self.config.review_subsidy;
        if listing.review_fund < subsidy {
            return Err(DdrmError::FundExhausted(service));
        }

        self.tokens.burn_srat(srat, tick)?;
        let fund = &mut self.market.service_mut(service).expect("checked").review_fund;
        *fund = fund.checked_sub(subsidy).ok_or(DdrmError::Overflow)?;
        self.ledger.absorb_gas(subsidy)?;
        self.ledger.append(&Event::GasCharged {
            payer: Payer::ReviewFund(service),
            op: GasOp::SubmitReview,
            amount: subsidy,
        });
        self.market.purchase_mut(purchase).expect("checked").reviewed = true;
        let id = ReviewId(self.reviews.reviews.len() as u64);
        self.reviews.reviews.push(Review {
            id,
            service,
            reviewer: pid,
            purchase,
            rating,
            text_digest,
            upvotes: 0,
            downvotes: 0,
            badge: Badge::Pending,
            tick,
        });
        self.reviews.service_reviewers.entry(service).or_default().push(pid);
        self.ledger.append(&Event::ReviewSubmitted {
            review: id,
            purchase,
            service,
            reviewer: pid,
            rating,
            text_digest,
            srat,
            subsidy,
        });
        self.grant_role(pid, Role::Reviewer);
        self.committed()?;
        Ok(id)
    }

    /// Casts one endorsement vote, consuming one of the endorser's SRDTs
    /// for the review's service.
    pub fn endorse_review(&mut self, who: impl Into<Caller>, review: ReviewId, vote: Vote) -> Result<TokenId> {
        let (pid, wallet) = self.active(who.into())?;
        let r = self.reviews.review(review).ok_or(DdrmError::UnknownReview(review))?;
        if r.badge != Badge::Pending {
            return Err(DdrmError::ReviewAlreadyBadged(review));
        }
        let service = r.service;
        if !self.reviews.is_selected(pid, service) {
            return Err(DdrmError::NotSelectedEndorser(pid, service));
        }
        if self.reviews.has_endorsed(pid, review) {
            return Err(DdrmError::DuplicateEndorsement(pid, review));
        }
        let tick = self.ledger.tick();
        let srdt = self.tokens.usable_srdt(pid, service, tick).ok_or(DdrmError::NoValidSrdt(pid, service))?;
        self.ledger.ensure_can_pay(wallet, self.ledger.gas_cost(GasOp::EndorseReview))?;

        self.ledger.charge_gas(wallet, GasOp::EndorseReview)?;
        self.tokens.consume_srdt(srdt, SrdtPurpose::Endorsement, tick)?;
        self.ledger.append(&Event::SrdtConsumed { token: srdt, holder: pid, purpose: SrdtPurpose::Endorsement });
        let r = &mut self.reviews.reviews[review.index()];
        match vote {
            Vote::Up => r.upvotes += 1,
            Vote::Down => r.downvotes += 1,
        }
        self.reviews.voted.insert((pid, review));
        self.reviews.annotations.push(EndorsementAnnotation { endorser: pid, review, service, vote, tick, srdt });
        self.ledger.append(&Event::Endorsed { review, service, endorser: pid, vote, srdt });
        self.committed()?;
        Ok(srdt)
    }

    /// Badges every quorum-reached Pending review of `service`, applies
    /// penalties, and reseats the roster. Does nothing if no review is
    /// eligible.
    pub fn run_endorser_selection(&mut self, service: ServiceId) -> Result<SelectionReport> {
        if self.market.service(service).is_none() {
            return Err(DdrmError::UnknownService(service));
        }
        let quorum = self.config.quorum;
        let literal_ties = self.config.literal_alg2_ties;
        let verdicts: Vec<(ReviewId, Badge)> = self
            .reviews
            .reviews_for(service)
            .filter(|r| r.badge == Badge::Pending && r.votes() >= quorum)
            .filter_map(|r| match r.upvotes.cmp(&r.downvotes) {
                Ordering::Greater => Some((r.id, Badge::Authentic)),
                Ordering::Less => Some((r.id, Badge::Fraudulent)),
                Ordering::Equal if literal_ties => Some((r.id, Badge::Fraudulent)),
                Ordering::Equal => None,
            })
            .collect();
        let mut report = SelectionReport {
            service,
            badged: Vec::new(),
            penalized: Vec::new(),
            excluded: Vec::new(),
            roster: self.reviews.roster(service),
            rebuilt: false,
        };
        if verdicts.is_empty() {
            return Ok(report);
        }

        let mut penalize = Vec::new();
        for &(id, badge) in &verdicts {
            let r = &mut self.reviews.reviews[id.index()];
            r.badge = badge;
            let (reviewer, upvotes, downvotes) = (r.reviewer, r.upvotes, r.downvotes);
            self.ledger.append(&Event::Badged { review: id, service, reviewer, badge, upvotes, downvotes });
            if badge == Badge::Authentic {
                self.market.service_mut(service).expect("checked").authentic_review_count += 1;
                if self.registry.get(reviewer).is_some_and(|p| p.is_active()) {
                    self.reviews.pools.entry(service).or_default().insert(reviewer);
                }
            } else {
                penalize.push((reviewer, id));
            }
        }

        let threshold = self.config.penalty_threshold;
        for (reviewer, id) in penalize {
            if let Some(pool) = self.reviews.pools.get_mut(&service) {
                pool.remove(&reviewer);
            }
            let count = {
                let c = self.reviews.penalties.entry(reviewer).or_insert(0);
                *c += 1;
                *c
            };
            self.ledger.append(&Event::PenaltyRecorded { participant: reviewer, review: id, count });
            report.penalized.push(reviewer);
            let active = self.registry.get(reviewer).is_some_and(|p| p.is_active());
            if count > threshold && active {
                self.exclude(reviewer)?;
                report.excluded.push(reviewer);
            }
        }

        let members = self.seat_roster(service, self.reviews.candidate_pool(service), false);
        self.award_dret(service)?;
        report.badged = verdicts;
        report.roster = members;
        report.rebuilt = true;
        self.committed()?;
        Ok(report)
    }

    /// Seeds an empty roster from the reviewers of the earliest reviews.
    pub fn bootstrap_endorsers(&mut self, service: ServiceId, n: usize) -> Result<Vec<ParticipantId>> {
        if self.market.service(service).is_none() {
            return Err(DdrmError::UnknownService(service));
        }
        if !self.reviews.roster(service).is_empty() {
            return Err(DdrmError::RosterNotEmpty(service));
        }
        // Review ids grow with submission tick, so id order is (tick, id) order.
        let earliest: Vec<ParticipantId> = self
            .reviews
            .reviews_for(service)
            .take(self.config.bootstrap_window)
            .map(|r| r.reviewer)
            .collect();
        if earliest.is_empty() {
            return Err(DdrmError::NoReviews(service));
        }
        let pool: Vec<ParticipantId> = earliest
            .into_iter()
            .filter(|p| self.registry.get(*p).is_some_and(|r| r.is_active()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let drawn = self.ledger.beacon_draw(&pool, n.min(pool.len()))?;
        if drawn.is_empty() {
            return Ok(drawn);
        }
        self.reviews.pools.entry(service).or_default().extend(drawn.iter().copied());
        let members = self.seat_roster(service, drawn, true);
        self.committed()?;
        Ok(members)
    }

    /// Replaces the roster with the active subset of `candidates`, minting
    /// one SRDT per member.
    fn seat_roster(&mut self, service: ServiceId, candidates: Vec<ParticipantId>, bootstrap: bool) -> Vec<ParticipantId> {
        let members: BTreeSet<ParticipantId> = candidates
            .into_iter()
            .filter(|p| self.registry.get(*p).is_some_and(|r| r.is_active()))
            .collect();
        let previous = self.reviews.rosters.insert(service, members.clone()).unwrap_or_default();
        for &m in &members {
            self.mint_srdt(m, service);
        }
        for &p in previous.union(&members) {
            self.sync_endorser_role(p);
        }
        let members: Vec<ParticipantId> = members.into_iter().collect();
        self.ledger.append(&Event::RosterRebuilt { service, members: members.clone(), bootstrap });
        members
    }

    /// Opens a refund claim and draws its adjudication panel from the
    /// service roster, excluding the claimant and the provider.
    pub fn file_refund_claim(&mut self, who: impl Into<Caller>, purchase: PurchaseId) -> Result<ClaimId> {
        let (pid, wallet) = self.active(who.into())?;
        let record = self.market.purchase(purchase).filter(|p| p.consumer == pid);
        let record = record.ok_or(DdrmError::NoPurchase(purchase))?;
        if record.refunded {
            return Err(DdrmError::AlreadyRefunded(purchase));
        }
        if self.reviews.claims_by_purchase.contains_key(&purchase) {
            return Err(DdrmError::DuplicateClaim(purchase));
        }
        let tick = self.ledger.tick();
        if tick >= record.tick + self.config.claim_window {
            return Err(DdrmError::ClaimWindowClosed(purchase));
        }
        let service = record.service;
        let provider = self.market.service(service).expect("purchase references a service").provider;
        let eligible: Vec<ParticipantId> =
            self.reviews.roster(service).into_iter().filter(|e| *e != pid && *e != provider).collect();
        if eligible.is_empty() {
            return Err(DdrmError::NoEndorsersAvailable(service));
        }
        self.ledger.ensure_can_pay(wallet, self.ledger.gas_cost(GasOp::FileRefundClaim))?;

        self.ledger.charge_gas(wallet, GasOp::FileRefundClaim)?;
        let k = self.config.panel_size.min(eligible.len());
        let panel = self.ledger.beacon_draw(&eligible, k)?;
        let id = ClaimId(self.reviews.claims.len() as u64);
        self.reviews.claims.push(RefundClaim {
            id,
            purchase,
            service,
            claimant: pid,
            provider,
            panel: panel.clone(),
            votes: BTreeMap::new(),
            outcome: ClaimOutcome::Open,
            tick,
        });
        self.reviews.claims_by_purchase.insert(purchase, id);
        self.ledger.append(&Event::RefundFiled { claim: id, purchase, claimant: pid, panel });
        self.committed()?;
        Ok(id)
    }

    fn voting_open(&self, claim: &RefundClaim) -> bool {
        self.ledger.tick() < claim.tick + self.config.voting_window
    }

    pub fn vote_refund(&mut self, who: impl Into<Caller>, claim: ClaimId, vote: RefundVote) -> Result<()> {
        let (pid, wallet) = self.active(who.into())?;
        let c = self.reviews.claim(claim).ok_or(DdrmError::UnknownClaim(claim))?;
        if c.outcome != ClaimOutcome::Open || !self.voting_open(c) {
            return Err(DdrmError::ClaimClosed(claim));
        }
        if !c.panel.contains(&pid) {
            return Err(DdrmError::NotPanelMember(pid, claim));
        }
        if c.votes.contains_key(&pid) {
            return Err(DdrmError::DuplicateVote(pid, claim));
        }
        self.ledger.ensure_can_pay(wallet, self.ledger.gas_cost(GasOp::VoteRefund))?;

        self.ledger.charge_gas(wallet, GasOp::VoteRefund)?;
        self.reviews.claims[claim.index()].votes.insert(pid, vote);
        self.ledger.append(&Event::RefundVoted { claim, voter: pid, vote });
        self.committed()
    }

    /// Closes a claim once every panelist has voted or the voting window
    /// has lapsed. A strict panel majority of Approve refunds `price_paid`.
    pub fn settle_refund(&mut self, claim: ClaimId) -> Result<ClaimOutcome> {
        let c = self.reviews.claim(claim).ok_or(DdrmError::UnknownClaim(claim))?;
        if c.outcome != ClaimOutcome::Open {
            return Err(DdrmError::ClaimClosed(claim));
        }
        if c.votes.len() < c.panel.len() && self.voting_open(c) {
            return Err(DdrmError::VotingStillOpen(claim));
        }
        let approved = c.approvals() * 2 > c.panel.len();
        let (purchase, claimant, provider) = (c.purchase, c.claimant, c.provider);
        let (outcome, amount, from, to) = if approved {
            let price = self.market.purchase(purchase).expect("claim references a purchase").price_paid;
            let from_wallet = self.registry.get(provider).expect("provider exists").wallet();
            let to_wallet = self.registry.get(claimant).expect("claimant exists").wallet();
            self.ledger.ensure_can_pay(from_wallet, price)?;
            self.ledger.transfer(from_wallet, to_wallet, price)?;
            self.market.purchase_mut(purchase).expect("checked").refunded = true;
            (ClaimOutcome::Approved, price, Some(provider), Some(claimant))
        } else {
            (ClaimOutcome::Rejected, Wei::ZERO, None, None)
        };
        self.reviews.claims[claim.index()].outcome = outcome;
        self.ledger.append(&Event::RefundSettled { claim, outcome, amount, from, to });
        self.committed()?;
        Ok(outcome)
    }

    /// Appends a harness annotation to the event log. Protocol events are
    /// refused; they may only come from state transitions.
    pub fn annotate(&mut self, event: Event) -> Result<()> {
        if !event.is_annotation() {
            return Err(DdrmError::InvariantViolation(format!("{} is not an annotation", event.kind())));
        }
        self.ledger.append(&event);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::CardFingerprint;
    use crate::protocol::ProtocolConfig;
    use crate::tokens::TokenState;

    fn text(s: &str) -> Digest {
        Digest::of(s.as_bytes())
    }

    struct World {
        sim: Ddrm,
        provider: ParticipantId,
        service: ServiceId,
        consumers: Vec<ParticipantId>,
        purchases: Vec<PurchaseId>,
    }

    fn world_with(cfg: ProtocolConfig, n: usize) -> World {
        let mut sim = Ddrm::new(cfg, Default::default(), 42).unwrap();
        sim.set_audit(true);
        let provider = sim.register(CardFingerprint::from_card("provider"), &[Role::ServiceProvider]).unwrap();
        let service = sim.add_service(provider, Wei::milli_ether(100)).unwrap();
        let mut consumers = Vec::new();
        let mut purchases = Vec::new();
        for i in 0..n {
            let c = sim.register(CardFingerprint::from_card(&format!("c{i}")), &[]).unwrap();
            purchases.push(sim.buy_service(c, service).unwrap());
            consumers.push(c);
        }
        World { sim, provider, service, consumers, purchases }
    }

    fn world(n: usize) -> World {
        world_with(ProtocolConfig::default(), n)
    }

    /// First `k` consumers review, then get bootstrapped as endorsers.
    fn with_endorsers(w: &mut World, k: usize) -> Vec<ParticipantId> {
        for i in 0..k {
            w.sim.submit_review(w.consumers[i], w.purchases[i], 5, text("ok")).unwrap();
        }
        w.sim.bootstrap_endorsers(w.service, k).unwrap()
    }

    #[test]
    fn review_burns_srat_and_spends_subsidy() {
        let mut w = world(1);
        let before = w.sim.balance(w.consumers[0]).unwrap();
        let r = w.sim.submit_review(w.consumers[0], w.purchases[0], 4, text("fine")).unwrap();
        assert_eq!(w.sim.reviews().review(r).unwrap().badge, Badge::Pending);
        assert_eq!(w.sim.market().service(w.service).unwrap().review_fund, Wei::milli_ether(990));
        assert_eq!(w.sim.balance(w.consumers[0]).unwrap(), before);
        let srat = w.sim.tokens().srat_for_purchase(w.purchases[0]).unwrap();
        assert_eq!(srat.state, TokenState::Burned);
        assert_eq!(w.sim.reviews().service_reviewers(w.service), &[w.consumers[0]]);
        assert!(w.sim.registry().get(w.consumers[0]).unwrap().has_role(Role::Reviewer));
    }

    #[test]
    fn review_gate_errors() {
        let mut w = world(2);
        let (a, b) = (w.consumers[0], w.consumers[1]);
        assert_eq!(w.sim.submit_review(a, w.purchases[1], 3, text("x")), Err(DdrmError::NoPurchase(w.purchases[1])));
        assert_eq!(
            w.sim.submit_review(a, PurchaseId(99), 3, text("x")),
            Err(DdrmError::NoPurchase(PurchaseId(99)))
        );
        assert_eq!(w.sim.submit_review(a, w.purchases[0], 0, text("x")), Err(DdrmError::InvalidRating(0)));
        w.sim.submit_review(a, w.purchases[0], 3, text("x")).unwrap();
        assert_eq!(
            w.sim.submit_review(a, w.purchases[0], 3, text("x")),
            Err(DdrmError::AlreadyReviewed(w.purchases[0]))
        );
        for _ in 0..100 {
            w.sim.advance_tick();
        }
        assert_eq!(w.sim.submit_review(b, w.purchases[1], 3, text("x")), Err(DdrmError::NoValidSrat(w.purchases[1])));
    }

    #[test]
    fn srat_valid_one_tick_before_expiry() {
        let mut w = world(1);
        for _ in 0..99 {
            w.sim.advance_tick();
        }
        assert!(w.sim.submit_review(w.consumers[0], w.purchases[0], 3, text("x")).is_ok());
    }

    #[test]
    fn starved_fund_rejects_reviews_until_replenished() {
        let cfg = ProtocolConfig { listing_deposit: Wei::milli_ether(20), ..Default::default() };
        let mut w = world_with(cfg, 3);
        w.sim.submit_review(w.consumers[0], w.purchases[0], 5, text("a")).unwrap();
        w.sim.submit_review(w.consumers[1], w.purchases[1], 5, text("b")).unwrap();
        assert!(w.sim.market().service(w.service).unwrap().is_review_starved(Wei::milli_ether(10)));
        let before = w.sim.clone();
        assert_eq!(
            w.sim.submit_review(w.consumers[2], w.purchases[2], 5, text("c")),
            Err(DdrmError::FundExhausted(w.service))
        );
        assert_eq!(w.sim, before);
        w.sim.replenish_fund(w.provider, w.service, Wei::milli_ether(10)).unwrap();
        assert!(w.sim.submit_review(w.consumers[2], w.purchases[2], 5, text("c")).is_ok());
    }

    #[test]
    fn bootstrap_clamps_and_is_deterministic() {
        let mut w = world(3);
        assert_eq!(w.sim.bootstrap_endorsers(w.service, 5), Err(DdrmError::NoReviews(w.service)));
        for i in 0..3 {
            w.sim.submit_review(w.consumers[i], w.purchases[i], 5, text("x")).unwrap();
        }
        let twin = w.sim.clone();
        let roster = w.sim.bootstrap_endorsers(w.service, 5).unwrap();
        assert_eq!(roster.len(), 3);
        for e in &roster {
            assert!(w.sim.registry().get(*e).unwrap().has_role(Role::Endorser));
            assert_eq!(w.sim.tokens().usable_srdt_count(*e, w.service, w.sim.tick()), 1);
        }
        assert_eq!(w.sim.bootstrap_endorsers(w.service, 5), Err(DdrmError::RosterNotEmpty(w.service)));
        let mut twin = twin;
        assert_eq!(twin.bootstrap_endorsers(w.service, 5).unwrap(), roster);
        assert_eq!(twin.ledger().head_hash(), w.sim.ledger().head_hash());
    }

    #[test]
    fn bootstrap_draws_from_earliest_window() {
        let mut w = world(12);
        for i in 0..12 {
            w.sim.submit_review(w.consumers[i], w.purchases[i], 5, text("x")).unwrap();
        }
        let roster = w.sim.bootstrap_endorsers(w.service, 5).unwrap();
        assert_eq!(roster.len(), 5);
        let early = &w.consumers[..10];
        assert!(roster.iter().all(|e| early.contains(e)));
    }

    #[test]
    fn endorsement_tallies_and_consumes_srdt() {
        let mut w = world(4);
        let endorsers = with_endorsers(&mut w, 3);
        let target = w.sim.submit_review(w.consumers[3], w.purchases[3], 5, text("t")).unwrap();
        let srdt = w.sim.endorse_review(endorsers[0], target, Vote::Up).unwrap();
        assert_eq!(w.sim.tokens().srdt(srdt).unwrap().state, TokenState::Consumed);
        assert_eq!(w.sim.reviews().review(target).unwrap().upvotes, 1);
        assert_eq!(
            w.sim.endorse_review(endorsers[0], target, Vote::Up),
            Err(DdrmError::DuplicateEndorsement(endorsers[0], target))
        );
        assert_eq!(
            w.sim.endorse_review(w.consumers[3], target, Vote::Up),
            Err(DdrmError::NotSelectedEndorser(w.consumers[3], w.service))
        );
        let other = w.sim.reviews().reviews_for(w.service).next().unwrap().id;
        assert_eq!(
            w.sim.endorse_review(endorsers[0], other, Vote::Up),
            Err(DdrmError::NoValidSrdt(endorsers[0], w.service))
        );
    }

    fn vote_on(w: &mut World, endorsers: &[ParticipantId], target: ReviewId, votes: &[Vote]) {
        for (e, v) in endorsers.iter().zip(votes) {
            w.sim.endorse_review(*e, target, *v).unwrap();
        }
    }

    #[test]
    fn three_up_one_down_is_authentic() {
        let mut w = world(5);
        let endorsers = with_endorsers(&mut w, 4);
        let target = w.sim.submit_review(w.consumers[4], w.purchases[4], 5, text("t")).unwrap();
        vote_on(&mut w, &endorsers, target, &[Vote::Up, Vote::Up, Vote::Up, Vote::Down]);
        let report = w.sim.run_endorser_selection(w.service).unwrap();
        assert_eq!(report.badged, vec![(target, Badge::Authentic)]);
        assert!(report.roster.contains(&w.consumers[4]));
        assert_eq!(w.sim.tokens().usable_srdt_count(w.consumers[4], w.service, w.sim.tick()), 1);
        assert_eq!(w.sim.market().service(w.service).unwrap().authentic_review_count, 1);
    }

    #[test]
    fn one_up_three_down_is_fraudulent() {
        let mut w = world(5);
        let endorsers = with_endorsers(&mut w, 4);
        let target = w.sim.submit_review(w.consumers[4], w.purchases[4], 1, text("t")).unwrap();
        vote_on(&mut w, &endorsers, target, &[Vote::Up, Vote::Down, Vote::Down, Vote::Down]);
        let report = w.sim.run_endorser_selection(w.service).unwrap();
        assert_eq!(report.badged, vec![(target, Badge::Fraudulent)]);
        assert_eq!(report.penalized, vec![w.consumers[4]]);
        assert_eq!(w.sim.reviews().fraudulent_count(w.consumers[4]), 1);
        assert!(!report.roster.contains(&w.consumers[4]));
    }

    #[test]
    fn ties_follow_policy() {
        for literal in [false, true] {
            let cfg = ProtocolConfig { literal_alg2_ties: literal, ..Default::default() };
            let mut w = world_with(cfg, 5);
            let endorsers = with_endorsers(&mut w, 4);
            let target = w.sim.submit_review(w.consumers[4], w.purchases[4], 3, text("t")).unwrap();
            vote_on(&mut w, &endorsers, target, &[Vote::Up, Vote::Up, Vote::Down, Vote::Down]);
            let report = w.sim.run_endorser_selection(w.service).unwrap();
            let badge = w.sim.reviews().review(target).unwrap().badge;
            if literal {
                assert_eq!(badge, Badge::Fraudulent);
                assert!(report.rebuilt);
            } else {
                assert_eq!(badge, Badge::Pending);
                assert!(!report.rebuilt);
            }
        }
    }

    #[test]
    fn below_quorum_stays_pending() {
        let mut w = world(4);
        let endorsers = with_endorsers(&mut w, 3);
        let target = w.sim.submit_review(w.consumers[3], w.purchases[3], 5, text("t")).unwrap();
        vote_on(&mut w, &endorsers, target, &[Vote::Up, Vote::Up]);
        let len = w.sim.ledger().log().len();
        let report = w.sim.run_endorser_selection(w.service).unwrap();
        assert!(report.badged.is_empty() && !report.rebuilt);
        assert_eq!(w.sim.ledger().log().len(), len);
        w.sim.endorse_review(endorsers[2], target, Vote::Up).unwrap();
        assert_eq!(w.sim.run_endorser_selection(w.service).unwrap().badged, vec![(target, Badge::Authentic)]);
        assert_eq!(
            w.sim.endorse_review(endorsers[2], target, Vote::Up),
            Err(DdrmError::ReviewAlreadyBadged(target))
        );
    }

    #[test]
    fn fourth_fraudulent_badge_excludes() {
        let cfg = ProtocolConfig { quorum: 1, ..Default::default() };
        let mut w = world_with(cfg, 2);
        let endorsers = with_endorsers(&mut w, 1);
        let judge = endorsers[0];
        let villain = w.consumers[1];
        let mut reviews = Vec::new();
        reviews.push(w.sim.submit_review(villain, w.purchases[1], 1, text("bad")).unwrap());
        for _ in 0..3 {
            let p = w.sim.buy_service(villain, w.service).unwrap();
            reviews.push(w.sim.submit_review(villain, p, 1, text("bad")).unwrap());
        }
        for (i, r) in reviews.iter().enumerate() {
            w.sim.endorse_review(judge, *r, Vote::Down).unwrap();
            let report = w.sim.run_endorser_selection(w.service).unwrap();
            let excluded = !w.sim.registry().get(villain).unwrap().is_active();
            assert_eq!(excluded, i == 3, "after badge {}", i + 1);
            assert_eq!(report.excluded.contains(&villain), i == 3);
        }
        assert_eq!(w.sim.reviews().fraudulent_count(villain), 4);
        assert_eq!(
            w.sim.buy_service(villain, w.service),
            Err(DdrmError::ParticipantExcluded(villain))
        );
    }

    #[test]
    fn roster_rebuild_drops_seat_not_tokens() {
        let cfg = ProtocolConfig { quorum: 1, ..Default::default() };
        let mut w = world_with(cfg, 3);
        let endorsers = with_endorsers(&mut w, 1);
        let judge = endorsers[0];
        let target = w.sim.submit_review(w.consumers[2], w.purchases[2], 1, text("t")).unwrap();
        // Seat consumer 2 via an authentic review, then check the pool persists.
        w.sim.endorse_review(judge, target, Vote::Up).unwrap();
        let report = w.sim.run_endorser_selection(w.service).unwrap();
        assert_eq!(report.roster, {
            let mut v = vec![judge, w.consumers[2]];
            v.sort();
            v
        });
        assert!(w.sim.registry().get(judge).unwrap().has_role(Role::Endorser));
    }

    fn claim_world(roster: usize) -> (World, Vec<ParticipantId>, PurchaseId, ParticipantId) {
        let mut w = world(roster + 1);
        let endorsers = with_endorsers(&mut w, roster);
        let claimant = w.consumers[roster];
        (w, endorsers, PurchaseId(roster as u64), claimant)
    }

    #[test]
    fn panel_of_five_from_seven() {
        let (mut w, endorsers, purchase, claimant) = claim_world(7);
        let c = w.sim.file_refund_claim(claimant, purchase).unwrap();
        let claim = w.sim.reviews().claim(c).unwrap();
        assert_eq!(claim.panel.len(), 5);
        let distinct: BTreeSet<_> = claim.panel.iter().collect();
        assert_eq!(distinct.len(), 5);
        assert!(claim.panel.iter().all(|p| endorsers.contains(p)));
        assert_eq!(w.sim.file_refund_claim(claimant, purchase), Err(DdrmError::DuplicateClaim(purchase)));
    }

    #[test]
    fn empty_roster_has_no_panel() {
        let mut w = world(1);
        assert_eq!(
            w.sim.file_refund_claim(w.consumers[0], w.purchases[0]),
            Err(DdrmError::NoEndorsersAvailable(w.service))
        );
    }

    #[test]
    fn claim_window_closes() {
        let (mut w, _, purchase, claimant) = claim_world(3);
        for _ in 0..50 {
            w.sim.advance_tick();
        }
        assert_eq!(w.sim.file_refund_claim(claimant, purchase), Err(DdrmError::ClaimWindowClosed(purchase)));
    }

    #[test]
    fn three_of_five_approves_and_moves_price() {
        let (mut w, _, purchase, claimant) = claim_world(5);
        let c = w.sim.file_refund_claim(claimant, purchase).unwrap();
        let panel = w.sim.reviews().claim(c).unwrap().panel.clone();
        let votes = [RefundVote::Approve, RefundVote::Approve, RefundVote::Approve, RefundVote::Reject, RefundVote::Reject];
        for (p, v) in panel.iter().zip(votes) {
            w.sim.vote_refund(*p, c, v).unwrap();
        }
        let (sp0, c0) = (w.sim.balance(w.provider).unwrap(), w.sim.balance(claimant).unwrap());
        assert_eq!(w.sim.settle_refund(c), Ok(ClaimOutcome::Approved));
        let price = Wei::milli_ether(100);
        assert_eq!(w.sim.balance(w.provider).unwrap(), sp0.checked_sub(price).unwrap());
        assert_eq!(w.sim.balance(claimant).unwrap(), c0.checked_add(price).unwrap());
        assert!(w.sim.market().purchase(purchase).unwrap().refunded);
        assert_eq!(w.sim.settle_refund(c), Err(DdrmError::ClaimClosed(c)));
        assert_eq!(w.sim.vote_refund(panel[0], c, RefundVote::Approve), Err(DdrmError::ClaimClosed(c)));
    }

    #[test]
    fn split_with_abstention_is_rejected_at_window_close() {
        let (mut w, _, purchase, claimant) = claim_world(5);
        let c = w.sim.file_refund_claim(claimant, purchase).unwrap();
        let panel = w.sim.reviews().claim(c).unwrap().panel.clone();
        let votes = [RefundVote::Approve, RefundVote::Approve, RefundVote::Reject, RefundVote::Reject];
        for (p, v) in panel.iter().zip(votes) {
            w.sim.vote_refund(*p, c, v).unwrap();
        }
        assert_eq!(w.sim.settle_refund(c), Err(DdrmError::VotingStillOpen(c)));
        for _ in 0..20 {
            w.sim.advance_tick();
        }
        assert_eq!(w.sim.vote_refund(panel[4], c, RefundVote::Approve), Err(DdrmError::ClaimClosed(c)));
        assert_eq!(w.sim.settle_refund(c), Ok(ClaimOutcome::Rejected));
        assert!(!w.sim.market().purchase(purchase).unwrap().refunded);
    }

    #[test]
    fn outsider_cannot_vote() {
        let (mut w, _, purchase, claimant) = claim_world(3);
        let c = w.sim.file_refund_claim(claimant, purchase).unwrap();
        assert_eq!(
            w.sim.vote_refund(claimant, c, RefundVote::Approve),
            Err(DdrmError::NotPanelMember(claimant, c))
        );
        let panel = w.sim.reviews().claim(c).unwrap().panel.clone();
        w.sim.vote_refund(panel[0], c, RefundVote::Reject).unwrap();
        assert_eq!(
            w.sim.vote_refund(panel[0], c, RefundVote::Reject),
            Err(DdrmError::DuplicateVote(panel[0], c))
        );
    }

    #[test]
    fn refund_keeps_review() {
        let (mut w, _, purchase, claimant) = claim_world(3);
        let r = w.sim.submit_review(claimant, purchase, 1, text("meh")).unwrap();
        let c = w.sim.file_refund_claim(claimant, purchase).unwrap();
        let panel = w.sim.reviews().claim(c).unwrap().panel.clone();
        for p in &panel {
            w.sim.vote_refund(*p, c, RefundVote::Approve).unwrap();
        }
        assert_eq!(w.sim.settle_refund(c), Ok(ClaimOutcome::Approved));
        assert_eq!(w.sim.reviews().review(r).unwrap().badge, Badge::Pending);
        assert_eq!(w.sim.file_refund_claim(claimant, purchase), Err(DdrmError::AlreadyRefunded(purchase)));
    }

    #[test]
    fn annotate_refuses_protocol_events() {
        let mut sim = Ddrm::with_seed(0);
        assert!(sim.annotate(Event::TokensExpired { tokens: vec![] }).is_err());
        sim.annotate(Event::ActionRejected { actor: None, action: "x".into(), error: "y".into() }).unwrap();
    }
}
