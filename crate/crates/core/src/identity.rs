//! Participant registration, pseudonymous addresses and exclusion.
//!
//! A payment card can back at most one participant for the lifetime of a
//! run, including after that participant is excluded. Balances and
//! penalties belong to the participant, never to an individual address.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::event::Event;
use crate::ids::{Address, Digest, ParticipantId};
use crate::protocol::{Caller, Ddrm, DdrmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ServiceProvider,
    Consumer,
    Reviewer,
    Endorser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantStatus {
    Active,
    Excluded,
}

/// Digest of a payment-card identifier. The card number itself never
/// enters the simulator.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CardFingerprint(pub Digest);

impl CardFingerprint {
    pub fn from_card(card: &str) -> Self {
        let mut bytes = b"ddrm/card/".to_vec();
        bytes.extend_from_slice(card.as_bytes());
        CardFingerprint(Digest::of(&bytes))
    }
}

impl fmt::Debug for CardFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Card({}…)", &self.0.to_hex()[..12])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: ParticipantId,
    /// First entry is the wallet that holds the participant's balance.
    pub addresses: Vec<Address>,
    pub roles: BTreeSet<Role>,
    pub card: CardFingerprint,
    pub status: ParticipantStatus,
}

impl ParticipantRecord {
    pub fn wallet(&self) -> Address {
        self.addresses[0]
    }

    pub fn is_active(&self) -> bool {
        self.status == ParticipantStatus::Active
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    seed: u64,
    participants: Vec<ParticipantRecord>,
    cards: BTreeMap<CardFingerprint, ParticipantId>,
    owners: BTreeMap<Address, ParticipantId>,
}

impl Registry {
    pub(crate) fn new(seed: u64) -> Self {
        Registry { seed, participants: Vec::new(), cards: BTreeMap::new(), owners: BTreeMap::new() }
    }

    pub fn get(&self, id: ParticipantId) -> Option<&ParticipantRecord> {
        self.participants.get(id.index())
    }

    pub(crate) fn get_mut(&mut self, id: ParticipantId) -> Option<&mut ParticipantRecord> {
        self.participants.get_mut(id.index())
    }

    pub fn owner_of(&self, addr: Address) -> Option<ParticipantId> {
        self.owners.get(&addr).copied()
    }

    pub fn card_owner(&self, card: &CardFingerprint) -> Option<ParticipantId> {
        self.cards.get(card).copied()
    }

    pub fn participants(&self) -> &[ParticipantRecord] {
        &self.participants
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.participants.iter().filter(|p| p.is_active()).count()
    }

    fn next_address(&self, id: ParticipantId, index: usize) -> Address {
        Address::derive(self.seed, id.0, index as u64)
    }
}

impl Ddrm {
    /// Registers a new participant behind `card` and credits the faucet grant.
    pub fn register(&mut self, card: CardFingerprint, roles: &[Role]) -> Result<ParticipantId> {
        if let Some(existing) = self.registry.card_owner(&card) {
            return Err(DdrmError::DuplicateCard(existing));
        }
        let grant = self.config.faucet_grant;
        let faucet = self.ledger.faucet();
        self.ledger.ensure_can_pay(faucet, grant)?;

        let id = ParticipantId(self.registry.len() as u64);
        let address = self.registry.next_address(id, 0);
        self.ledger.open_account(address);
        self.ledger.transfer(faucet, address, grant)?;
        let roles: BTreeSet<Role> = roles.iter().copied().collect();
        self.registry.participants.push(ParticipantRecord {
            id,
            addresses: vec![address],
            roles: roles.clone(),
            card,
            status: ParticipantStatus::Active,
        });
        self.registry.cards.insert(card, id);
        self.registry.owners.insert(address, id);
        self.ledger.append(&Event::Registered {
            participant: id,
            address,
            card,
            roles: roles.into_iter().collect(),
            grant,
        });
        self.committed()?;
        Ok(id)
    }

    /// Adds another pseudonymous address for an active participant.
    pub fn bind_address(&mut self, who: impl Into<Caller>) -> Result<Address> {
        let (id, _) = self.active(who.into())?;
        let index = self.registry.get(id).expect("resolved").addresses.len();
        let address = self.registry.next_address(id, index);
        self.registry.get_mut(id).expect("resolved").addresses.push(address);
        self.registry.owners.insert(address, id);
        self.ledger.append(&Event::AddressBound { participant: id, address });
        Ok(address)
    }

    /// Permanently removes a participant: tokens voided, roster seats
    /// dropped. Idempotent.
    pub fn exclude(&mut self, id: ParticipantId) -> Result<ParticipantStatus> {
        let record = self.registry.get(id).ok_or(DdrmError::UnknownParticipant(id))?;
        if !record.is_active() {
            return Ok(ParticipantStatus::Excluded);
        }
        self.registry.get_mut(id).expect("exists").status = ParticipantStatus::Excluded;
        let voided = self.tokens.void_all_held(id);
        self.reviews.remove_endorser(id);
        self.sync_endorser_role(id);
        self.ledger.append(&Event::Excluded {
            participant: id,
            fraudulent_badges: self.reviews.fraudulent_count(id),
            voided,
        });
        Ok(ParticipantStatus::Excluded)
    }

    pub(crate) fn grant_role(&mut self, id: ParticipantId, role: Role) {
        if let Some(p) = self.registry.get_mut(id) {
            p.roles.insert(role);
        }
    }

    /// Keeps the Endorser role in step with roster membership.
    pub(crate) fn sync_endorser_role(&mut self, id: ParticipantId) {
        let seated = self.reviews.is_seated_anywhere(id);
        if let Some(p) = self.registry.get_mut(id) {
            if seated {
                p.roles.insert(Role::Endorser);
            } else {
                p.roles.remove(&Role::Endorser);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wei::Wei;

    fn card(n: u32) -> CardFingerprint {
        CardFingerprint::from_card(&format!("4111-0000-0000-{n:04}"))
    }

    #[test]
    fn fresh_card_gets_grant() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[Role::Consumer]).unwrap();
        assert_eq!(sim.balance(p).unwrap(), Wei::ether(10));
        assert!(sim.registry().get(p).unwrap().has_role(Role::Consumer));
        sim.check_conservation().unwrap();
    }

    #[test]
    fn same_card_twice_is_rejected() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[Role::Consumer]).unwrap();
        let before = sim.clone();
        assert_eq!(sim.register(card(1), &[Role::Consumer]), Err(DdrmError::DuplicateCard(p)));
        assert_eq!(sim, before);
    }

    #[test]
    fn excluded_card_stays_reserved() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[Role::Consumer]).unwrap();
        sim.exclude(p).unwrap();
        assert_eq!(sim.register(card(1), &[]), Err(DdrmError::DuplicateCard(p)));
        assert!(sim.register(card(2), &[]).is_ok());
    }

    #[test]
    fn bound_addresses_share_one_balance() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[Role::Consumer]).unwrap();
        let alias = sim.bind_address(p).unwrap();
        assert_eq!(sim.registry().get(p).unwrap().addresses.len(), 2);
        assert_eq!(sim.registry().owner_of(alias), Some(p));
        assert_eq!(sim.balance(alias).unwrap(), sim.balance(p).unwrap());
        let third = sim.bind_address(alias).unwrap();
        assert_ne!(third, alias);
    }

    #[test]
    fn excluded_cannot_bind() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[]).unwrap();
        sim.exclude(p).unwrap();
        assert_eq!(sim.bind_address(p), Err(DdrmError::ParticipantExcluded(p)));
        assert_eq!(
            sim.bind_address(ParticipantId(9)),
            Err(DdrmError::UnknownParticipant(ParticipantId(9)))
        );
    }

    #[test]
    fn exclusion_is_idempotent() {
        let mut sim = Ddrm::with_seed(1);
        let p = sim.register(card(1), &[]).unwrap();
        assert_eq!(sim.exclude(p), Ok(ParticipantStatus::Excluded));
        let len = sim.ledger().log().len();
        assert_eq!(sim.exclude(p), Ok(ParticipantStatus::Excluded));
        assert_eq!(sim.ledger().log().len(), len);
        assert_eq!(sim.exclude(ParticipantId(5)), Err(DdrmError::UnknownParticipant(ParticipantId(5))));
    }

    #[test]
    fn empty_faucet_refuses_registration() {
        let cfg = crate::protocol::ProtocolConfig {
            faucet_supply: Wei::ether(15),
            ..Default::default()
        };
        let mut sim = Ddrm::new(cfg, Default::default(), 0).unwrap();
        sim.register(card(1), &[]).unwrap();
        assert!(matches!(sim.register(card(2), &[]), Err(DdrmError::InsufficientFunds { .. })));
        assert_eq!(sim.registry().len(), 1);
    }
}
