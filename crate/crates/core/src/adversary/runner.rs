//! Round-based scenario execution.
//!
//! Each round runs five phases (purchases, reviews, endorsements,
//! selection, refunds) and the ledger advances one tick after each.
//! Endorsers only judge reviews submitted in earlier rounds. Failed actions
//! are logged as `ActionRejected` and the run carries on; only an invariant
//! violation aborts it.

use std::collections::{BTreeMap, BTreeSet};

use super::metrics::{collect, dishonest_share, LiveTally, ScenarioMetrics};
use super::persona::{Quality, RaterCategory, RaterPersona};
use super::scenario::{AttackScenario, ScenarioError, ScenarioKind};
use crate::event::Event;
use crate::identity::{CardFingerprint, Role};
use crate::ids::{Address, ClaimId, Digest, ParticipantId, PurchaseId, ServiceId};
use crate::ledger::{EventRecord, GasSchedule, RandomBeacon};
use crate::protocol::{Caller, Ddrm, DdrmError, ProtocolConfig};
use crate::review::{Badge, ClaimOutcome};

/// A finished scenario: its metrics and the simulator that produced them.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub name: String,
    pub seed: u64,
    pub metrics: ScenarioMetrics,
    pub sim: Ddrm,
}

impl ScenarioRun {
    pub fn records(&self) -> &[EventRecord] {
        self.sim.ledger().log().records()
    }

    pub fn head_hash(&self) -> Digest {
        self.sim.ledger().head_hash()
    }

    pub fn to_ndjson(&self) -> String {
        self.sim.ledger().log().to_ndjson()
    }
}

#[derive(Debug, Clone)]
struct AttackerSlot {
    card: String,
    identity: Option<ParticipantId>,
    /// Address the attacker transacts from (Sybil uses a bound alias).
    caller: Option<Address>,
    /// Ballot stuffing: the consumer account buying the attacker's service.
    colluder: Option<ParticipantId>,
    fake_purchases: usize,
}

struct Harness<'a> {
    sc: &'a AttackScenario,
    sim: Ddrm,
    rng: RandomBeacon,
    ground: BTreeMap<ServiceId, Quality>,
    personas: BTreeMap<ParticipantId, RaterPersona>,
    honest: Vec<ParticipantId>,
    attackers: Vec<AttackerSlot>,
    tally: LiveTally,
    pending_reviews: BTreeMap<ParticipantId, Vec<PurchaseId>>,
    claimable: Vec<(ParticipantId, PurchaseId)>,
    open_claims: BTreeSet<ClaimId>,
    round_start: u64,
}

/// Runs `scenario` with `base` protocol parameters. `run_seed` is used
/// unless the scenario pins its own.
pub fn run_scenario(
    scenario: &AttackScenario,
    base: &ProtocolConfig,
    gas: &GasSchedule,
    run_seed: u64,
) -> Result<ScenarioRun, ScenarioError> {
    scenario.validate()?;
    let protocol = scenario.protocol(base, gas)?;
    let seed = scenario.seed.unwrap_or(run_seed);
    let mut sim = Ddrm::new(protocol, gas.clone(), seed)
        .map_err(|source| ScenarioError::Config { name: scenario.name.clone(), source })?;
    sim.set_audit(true);
    let mut h = Harness {
        sc: scenario,
        sim,
        // Harness choices get their own stream so they never shift protocol draws.
        rng: RandomBeacon::new(!seed),
        ground: BTreeMap::new(),
        personas: BTreeMap::new(),
        honest: Vec::new(),
        attackers: Vec::new(),
        tally: LiveTally::default(),
        pending_reviews: BTreeMap::new(),
        claimable: Vec::new(),
        open_claims: BTreeSet::new(),
        round_start: 0,
    };
    h.build_population()?;
    for round in 0..scenario.rounds {
        h.round_start = h.sim.tick();
        h.phase_purchases(round)?;
        h.sim.advance_tick();
        h.phase_reviews(round)?;
        h.sim.advance_tick();
        h.phase_endorsements()?;
        h.sim.advance_tick();
        h.phase_selection()?;
        h.sim.advance_tick();
        h.phase_refunds()?;
        h.sim.advance_tick();
    }
    h.finish(seed)
}

impl Harness<'_> {
    fn invariant(&self, e: DdrmError) -> ScenarioError {
        ScenarioError::Invariant { name: self.sc.name.clone(), message: e.to_string() }
    }

    fn annotate(&mut self, event: Event) -> Result<(), ScenarioError> {
        self.sim.annotate(event).map_err(|e| self.invariant(e))
    }

    fn is_attacker(&self, p: ParticipantId) -> bool {
        self.personas.get(&p).is_some_and(|x| x.attacker)
    }

    fn is_active(&self, p: ParticipantId) -> bool {
        self.sim.registry().get(p).is_some_and(|r| r.is_active())
    }

    fn quality(&self, s: ServiceId) -> Quality {
        self.ground.get(&s).copied().unwrap_or(Quality::Good)
    }

    fn persona_of(&self, p: ParticipantId) -> RaterPersona {
        self.personas.get(&p).cloned().unwrap_or_else(|| RaterPersona {
            participant: p,
            category: RaterCategory::HappyHonest,
            attacker: false,
            honest_vote_probability: self.sc.honest_vote_probability,
            target_services: BTreeSet::new(),
            budget: self.sim.config().faucet_grant,
        })
    }

    /// Runs one protocol call. Ordinary rejections are logged and yield
    /// `None`; invariant violations abort the scenario.
    fn attempt<T>(
        &mut self,
        actor: Option<ParticipantId>,
        action: &str,
        f: impl FnOnce(&mut Ddrm) -> Result<T, DdrmError>,
    ) -> Result<Option<T>, ScenarioError> {
        match f(&mut self.sim) {
            Ok(v) => Ok(Some(v)),
            Err(e @ DdrmError::InvariantViolation(_)) => Err(self.invariant(e)),
            Err(e) => {
                if action == "submit_review" && actor.is_some_and(|a| self.is_attacker(a)) {
                    self.tally.attacker_review_rejections += 1;
                }
                self.annotate(Event::ActionRejected { actor, action: action.into(), error: e.to_string() })?;
                Ok(None)
            }
        }
    }

    fn register(&mut self, card: &str, roles: &[Role], attacker: bool, whitewash: bool) -> Result<Option<ParticipantId>, ScenarioError> {
        let fingerprint = CardFingerprint::from_card(card);
        let result = self.sim.register(fingerprint, roles);
        let participant = match result {
            Ok(p) => Some(p),
            Err(e @ DdrmError::InvariantViolation(_)) => return Err(self.invariant(e)),
            Err(_) => None,
        };
        if attacker {
            if whitewash {
                self.tally.whitewash_attempts += 1;
                self.tally.whitewash_successes += participant.is_some() as u64;
            } else {
                self.tally.registrations_attempted += 1;
                self.tally.registrations_succeeded += participant.is_some() as u64;
            }
        }
        self.annotate(Event::RegistrationAttempt { card: fingerprint, attacker, whitewash, participant })?;
        Ok(participant)
    }

    fn assign(&mut self, participant: ParticipantId, category: RaterCategory, attacker: bool, targets: &[ServiceId]) -> Result<(), ScenarioError> {
        self.personas.insert(
            participant,
            RaterPersona {
                participant,
                category,
                attacker,
                honest_vote_probability: self.sc.honest_vote_probability,
                target_services: targets.iter().copied().collect(),
                budget: self.sim.config().faucet_grant,
            },
        );
        self.annotate(Event::PersonaAssigned { participant, category, attacker })
    }

    fn list(&mut self, provider: ParticipantId, quality: Quality) -> Result<Option<ServiceId>, ScenarioError> {
        let cost = self.sc.service_cost;
        let service = self.attempt(Some(provider), "add_service", |s| s.add_service(provider, cost))?;
        if let Some(service) = service {
            self.ground.insert(service, quality);
            self.annotate(Event::GroundTruth { service, quality })?;
        }
        Ok(service)
    }

    fn build_population(&mut self) -> Result<(), ScenarioError> {
        let sc = self.sc;
        let cfg = self.sim.config().clone();
        self.annotate(Event::ScenarioStarted {
            name: sc.name.clone(),
            kind: sc.kind,
            seed: self.sim.ledger().beacon().seed(),
            quorum: cfg.quorum,
            penalty_threshold: cfg.penalty_threshold,
        })?;

        let mut good = Vec::new();
        let mut bad = Vec::new();
        for i in 0..sc.good_services + sc.bad_services {
            let quality = if i < sc.good_services { Quality::Good } else { Quality::Bad };
            let Some(p) = self.register(&format!("provider-{i}"), &[Role::ServiceProvider], false, false)? else {
                continue;
            };
            if let Some(s) = self.list(p, quality)? {
                if quality == Quality::Good { good.push(s) } else { bad.push(s) }
            }
        }
        let all: Vec<ServiceId> = good.iter().chain(&bad).copied().collect();
        let or_all = |v: &Vec<ServiceId>| if v.is_empty() { all.clone() } else { v.clone() };

        for i in 0..sc.happy_honest + sc.unhappy_honest {
            let (category, targets) = if i < sc.happy_honest {
                (RaterCategory::HappyHonest, or_all(&good))
            } else {
                (RaterCategory::UnhappyHonest, or_all(&bad))
            };
            if let Some(p) = self.register(&format!("honest-{i}"), &[Role::Consumer], false, false)? {
                self.assign(p, category, false, &targets)?;
                self.honest.push(p);
            }
        }

        let first_good = good.first().or(all.first()).copied();
        let first_bad = bad.first().or(all.first()).copied();
        for a in 0..sc.attacker_count {
            let card = format!("attacker-{a}");
            let mut slot = AttackerSlot { card: card.clone(), identity: None, caller: None, colluder: None, fake_purchases: 0 };
            let roles: &[Role] = if sc.kind == ScenarioKind::BallotStuffing { &[Role::ServiceProvider] } else { &[Role::Consumer] };
            for _ in 0..sc.fake_identities_per_attacker {
                if let Some(p) = self.register(&card, roles, true, false)? {
                    slot.identity.get_or_insert(p);
                }
            }
            let Some(id) = slot.identity else {
                self.attackers.push(slot);
                continue;
            };
            match sc.kind {
                ScenarioKind::BallotStuffing => {
                    // persona first, so the listing spend is attributed in the log
                    self.assign(id, RaterCategory::HappyDishonest, true, &[])?;
                    let own = self.list(id, Quality::Bad)?;
                    let targets: Vec<ServiceId> = own.into_iter().collect();
                    self.personas.get_mut(&id).expect("assigned").target_services = targets.iter().copied().collect();
                    if let Some(c) = self.register(&format!("{card}-colluder"), &[Role::Consumer], true, false)? {
                        self.assign(c, RaterCategory::HappyDishonest, true, &targets)?;
                        slot.colluder = Some(c);
                    }
                }
                ScenarioKind::Sybil | ScenarioKind::Collusion => {
                    let targets: Vec<ServiceId> = first_bad.into_iter().collect();
                    self.assign(id, RaterCategory::HappyDishonest, true, &targets)?;
                }
                _ => {
                    let targets: Vec<ServiceId> = first_good.into_iter().collect();
                    self.assign(id, RaterCategory::UnhappyDishonest, true, &targets)?;
                }
            }
            slot.caller = if sc.kind == ScenarioKind::Sybil {
                self.attempt(Some(id), "bind_address", |s| s.bind_address(id))?
            } else {
                None
            };
            self.attackers.push(slot);
        }
        Ok(())
    }

    fn attackers_first(&self) -> bool {
        self.sc.kind == ScenarioKind::MajorityEndorser
    }

    fn buy(&mut self, buyer: ParticipantId, caller: Caller, service: ServiceId) -> Result<Option<PurchaseId>, ScenarioError> {
        let bought = self.attempt(Some(buyer), "buy_service", |s| s.buy_service(caller, service))?;
        if let Some(p) = bought {
            self.pending_reviews.entry(buyer).or_default().push(p);
            self.claimable.push((buyer, p));
        }
        Ok(bought)
    }

    fn phase_purchases(&mut self, round: u32) -> Result<(), ScenarioError> {
        if self.sc.kind == ScenarioKind::Whitewashing {
            for i in 0..self.attackers.len() {
                let slot = self.attackers[i].clone();
                if slot.identity.is_some_and(|p| !self.is_active(p)) {
                    self.register(&slot.card, &[Role::Consumer], true, true)?;
                }
            }
        }
        if self.attackers_first() {
            self.attacker_purchases(round)?;
            self.honest_purchases()
        } else {
            self.honest_purchases()?;
            self.attacker_purchases(round)
        }
    }

    fn honest_purchases(&mut self) -> Result<(), ScenarioError> {
        for p in self.honest.clone() {
            if !self.is_active(p) || !self.rng.chance(self.sc.purchase_probability) {
                continue;
            }
            let targets: Vec<ServiceId> = self.personas[&p].target_services.iter().copied().collect();
            if targets.is_empty() {
                continue;
            }
            let service = targets[self.rng.below(targets.len() as u64) as usize];
            self.buy(p, p.into(), service)?;
        }
        Ok(())
    }

    fn attacker_purchases(&mut self, round: u32) -> Result<(), ScenarioError> {
        if round < self.sc.attack_start_round {
            return Ok(());
        }
        let active_rounds = (self.sc.rounds - self.sc.attack_start_round) as usize;
        for i in 0..self.attackers.len() {
            let slot = self.attackers[i].clone();
            let Some(id) = slot.identity.filter(|p| self.is_active(*p)) else { continue };
            let Some(&target) = self.personas[&id].target_services.iter().next() else { continue };
            match self.sc.kind {
                ScenarioKind::ConstantAttack => {}
                ScenarioKind::BallotStuffing => {
                    let Some(c) = slot.colluder.filter(|c| self.is_active(*c)) else { continue };
                    let per_round = self.sc.fake_reviews.div_ceil(active_rounds.max(1));
                    let todo = per_round.min(self.sc.fake_reviews - slot.fake_purchases);
                    for _ in 0..todo {
                        if self.buy(c, c.into(), target)?.is_some() {
                            self.attackers[i].fake_purchases += 1;
                        }
                    }
                }
                _ => {
                    let caller: Caller = slot.caller.map(Caller::from).unwrap_or(id.into());
                    self.buy(id, caller, target)?;
                }
            }
        }
        Ok(())
    }

    fn phase_reviews(&mut self, round: u32) -> Result<(), ScenarioError> {
        let mut order: Vec<ParticipantId> = self.pending_reviews.keys().copied().collect();
        if self.attackers_first() {
            order.sort_by_key(|p| (!self.is_attacker(*p), *p));
        } else {
            order.sort_by_key(|p| (self.is_attacker(*p), *p));
        }
        let mut pending = std::mem::take(&mut self.pending_reviews);
        for reviewer in order {
            let purchases = pending.remove(&reviewer).unwrap_or_default();
            if self.sc.kind == ScenarioKind::FalseRefund && self.is_attacker(reviewer) {
                continue;
            }
            for purchase in purchases {
                self.review(reviewer, purchase)?;
            }
        }
        if self.sc.kind == ScenarioKind::ConstantAttack && round >= self.sc.attack_start_round {
            for i in 0..self.attackers.len() {
                let Some(id) = self.attackers[i].identity.filter(|p| self.is_active(*p)) else { continue };
                let n = self.sim.market().purchases().len() as u64;
                let stolen = PurchaseId(if n == 0 { 0 } else { self.rng.below(n) });
                let digest = Digest::of(format!("{id}:{stolen}:1").as_bytes());
                self.attempt(Some(id), "submit_review", |s| s.submit_review(id, stolen, 1, digest))?;
            }
        }
        Ok(())
    }

    fn review(&mut self, reviewer: ParticipantId, purchase: PurchaseId) -> Result<(), ScenarioError> {
        let service = self.sim.market().purchase(purchase).expect("own purchase").service;
        let listing = self.sim.market().service(service).expect("listed").clone();
        let subsidy = self.sim.config().review_subsidy;
        if listing.is_review_starved(subsidy) && self.is_active(listing.provider) {
            let amount = self.sim.config().listing_deposit;
            let provider = listing.provider;
            self.attempt(Some(provider), "replenish_fund", |s| s.replenish_fund(provider, service, amount))?;
        }
        let persona = self.persona_of(reviewer);
        let rating = persona.rate(self.quality(service), service, &mut self.rng);
        let digest = Digest::of(format!("{reviewer}:{purchase}:{rating}").as_bytes());
        let caller: Caller = self
            .attackers
            .iter()
            .find(|a| a.identity == Some(reviewer))
            .and_then(|a| a.caller)
            .map(Caller::from)
            .unwrap_or(reviewer.into());
        self.attempt(Some(reviewer), "submit_review", |s| s.submit_review(caller, purchase, rating, digest))?;
        Ok(())
    }

    fn note_roster(&mut self, roster: &[ParticipantId]) {
        if let Some(share) = dishonest_share(roster, &self.personas) {
            if share > self.tally.peak_share {
                self.tally.peak_share = share;
            }
        }
    }

    fn phase_endorsements(&mut self) -> Result<(), ScenarioError> {
        let services: Vec<ServiceId> = self.sim.market().services().iter().map(|s| s.id).collect();
        let quorum = self.sim.config().quorum;
        let n = self.sim.config().bootstrap_n;
        for service in services {
            let has_old_review = self.sim.reviews().reviews_for(service).any(|r| r.tick < self.round_start);
            if self.sim.reviews().roster(service).is_empty() && has_old_review {
                if let Some(roster) = self.attempt(None, "bootstrap_endorsers", |s| s.bootstrap_endorsers(service, n))? {
                    self.note_roster(&roster);
                }
            }
            for member in self.sim.reviews().roster(service) {
                loop {
                    if self.sim.tokens().usable_srdt_count(member, service, self.sim.tick()) == 0 {
                        break;
                    }
                    let book = self.sim.reviews();
                    let next = book
                        .reviews_for(service)
                        .find(|r| {
                            r.badge == Badge::Pending
                                && r.tick < self.round_start
                                && r.votes() < quorum
                                && r.reviewer != member
                                && !book.has_endorsed(member, r.id)
                        })
                        .map(|r| (r.id, r.rating));
                    let Some((review, rating)) = next else { break };
                    let vote = self.persona_of(member).vote(rating, self.quality(service), service, &mut self.rng);
                    if self.attempt(Some(member), "endorse_review", |s| s.endorse_review(member, review, vote))?.is_none() {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    fn phase_selection(&mut self) -> Result<(), ScenarioError> {
        let services: Vec<ServiceId> = self.sim.market().services().iter().map(|s| s.id).collect();
        for service in services {
            if let Some(report) = self.attempt(None, "run_endorser_selection", |s| s.run_endorser_selection(service))? {
                if report.rebuilt {
                    self.note_roster(&report.roster);
                }
            }
        }
        Ok(())
    }

    fn phase_refunds(&mut self) -> Result<(), ScenarioError> {
        for (consumer, purchase) in std::mem::take(&mut self.claimable) {
            if !self.is_active(consumer) {
                continue;
            }
            let service = self.sim.market().purchase(purchase).expect("recorded").service;
            let attacker = self.is_attacker(consumer);
            let wants = if attacker {
                self.sc.kind == ScenarioKind::FalseRefund
            } else {
                self.quality(service) == Quality::Bad
            };
            if !wants {
                continue;
            }
            if let Some(c) = self.attempt(Some(consumer), "file_refund_claim", |s| s.file_refund_claim(consumer, purchase))? {
                self.open_claims.insert(c);
            }
        }

        let window = self.sim.config().voting_window;
        for claim_id in self.open_claims.clone() {
            let claim = self.sim.reviews().claim(claim_id).expect("filed").clone();
            let claimant_attacker = self.is_attacker(claim.claimant);
            let quality = self.quality(claim.service);
            for voter in &claim.panel {
                let voter = *voter;
                if claim.votes.contains_key(&voter) || !self.is_active(voter) || self.sim.tick() >= claim.tick + window {
                    continue;
                }
                let vote = self.persona_of(voter).refund_vote(claimant_attacker, quality, &mut self.rng);
                self.attempt(Some(voter), "vote_refund", |s| s.vote_refund(voter, claim_id, vote))?;
            }
            let claim = self.sim.reviews().claim(claim_id).expect("filed");
            if claim.votes.len() == claim.panel.len() || self.sim.tick() >= claim.tick + window {
                let outcome = self.attempt(None, "settle_refund", |s| s.settle_refund(claim_id))?;
                if outcome.is_some_and(|o| o != ClaimOutcome::Open) {
                    self.open_claims.remove(&claim_id);
                }
            }
        }
        Ok(())
    }

    fn finish(mut self, seed: u64) -> Result<ScenarioRun, ScenarioError> {
        self.sim.check_conservation().map_err(|e| self.invariant(e))?;
        let metrics = collect(&self.sim, &self.personas, &self.ground, &self.tally);
        self.annotate(Event::ScenarioFinished { metrics: metrics.clone() })?;
        Ok(ScenarioRun { name: self.sc.name.clone(), seed, metrics, sim: self.sim })
    }
}
