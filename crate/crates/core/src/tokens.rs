//! SRAT, SRDT and DRET lifecycles.
//!
//! SRAT: minted one per purchase, burned by the review it authorizes.
//! SRDT: granted to selected endorsers, consumed by one endorsement vote or
//! one discounted purchase of its bound service.
//! DRET: a per-provider counter, one unit per `dret_k` Authentic badges on
//! a service.
//!
//! Every token leaves `Active` at most once and never returns. Expiry is
//! inclusive: a token with `expiry_tick = t` is dead from tick `t` on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::Event;
use crate::ids::{ParticipantId, PurchaseId, ServiceId, TokenId};
use crate::protocol::{Ddrm, DdrmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Srat,
    Srdt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenState {
    Active,
    /// SRAT only.
    Burned,
    /// SRDT only.
    Consumed,
    Expired,
    Voided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrdtPurpose {
    Endorsement,
    DiscountedPurchase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SratToken {
    pub id: TokenId,
    pub holder: ParticipantId,
    pub service: ServiceId,
    pub purchase: PurchaseId,
    pub minted_tick: u64,
    pub expiry_tick: u64,
    pub state: TokenState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrdtToken {
    pub id: TokenId,
    pub holder: ParticipantId,
    pub service: ServiceId,
    pub minted_tick: u64,
    pub expiry_tick: u64,
    pub discount_bps: u32,
    pub state: TokenState,
    pub consumed_for: Option<SrdtPurpose>,
}

fn usable(id: TokenId, state: TokenState, expiry_tick: u64, tick: u64) -> Result<()> {
    match state {
        TokenState::Active if tick >= expiry_tick => Err(DdrmError::TokenExpired(id)),
        TokenState::Active => Ok(()),
        TokenState::Expired => Err(DdrmError::TokenExpired(id)),
        _ => Err(DdrmError::TokenNotActive(id)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStore {
    next_id: u64,
    srats: BTreeMap<TokenId, SratToken>,
    srdts: BTreeMap<TokenId, SrdtToken>,
    srat_by_purchase: BTreeMap<PurchaseId, TokenId>,
    dret: BTreeMap<ParticipantId, u64>,
    /// Award units already paid out per service.
    dret_paid: BTreeMap<ServiceId, u64>,
}

impl TokenStore {
    pub fn srat(&self, id: TokenId) -> Option<&SratToken> {
        self.srats.get(&id)
    }

    pub fn srdt(&self, id: TokenId) -> Option<&SrdtToken> {
        self.srdts.get(&id)
    }

    pub fn srats(&self) -> impl Iterator<Item = &SratToken> {
        self.srats.values()
    }

    pub fn srdts(&self) -> impl Iterator<Item = &SrdtToken> {
        self.srdts.values()
    }

    pub fn srat_for_purchase(&self, purchase: PurchaseId) -> Option<&SratToken> {
        self.srat_by_purchase.get(&purchase).and_then(|id| self.srats.get(id))
    }

    /// Active SRATs held by `holder`.
    pub fn srat_balance(&self, holder: ParticipantId) -> usize {
        self.srats.values().filter(|t| t.holder == holder && t.state == TokenState::Active).count()
    }

    /// Lowest-id SRDT `holder` can still spend on `service` at `tick`.
    pub fn usable_srdt(&self, holder: ParticipantId, service: ServiceId, tick: u64) -> Option<TokenId> {
        self.srdts
            .values()
            .find(|t| {
                t.holder == holder
                    && t.service == service
                    && t.state == TokenState::Active
                    && tick < t.expiry_tick
            })
            .map(|t| t.id)
    }

    pub fn usable_srdt_count(&self, holder: ParticipantId, service: ServiceId, tick: u64) -> usize {
        self.srdts
            .values()
            .filter(|t| {
                t.holder == holder
                    && t.service == service
                    && t.state == TokenState::Active
                    && tick < t.expiry_tick
            })
            .count()
    }

    pub fn dret_balance(&self, provider: ParticipantId) -> u64 {
        self.dret.get(&provider).copied().unwrap_or(0)
    }

    pub fn dret_total(&self) -> u64 {
        self.dret.values().sum()
    }

    fn fresh_id(&mut self) -> TokenId {
        let id = TokenId(self.next_id);
        self.next_id += 1;
        id
    }

    pub(crate) fn check_srat(&self, id: TokenId, tick: u64) -> Result<&SratToken> {
        let t = self.srats.get(&id).ok_or(DdrmError::UnknownToken(id))?;
        usable(id, t.state, t.expiry_tick, tick)?;
        Ok(t)
    }

    pub(crate) fn burn_srat(&mut self, id: TokenId, tick: u64) -> Result<TokenState> {
        self.check_srat(id, tick)?;
        let t = self.srats.get_mut(&id).expect("checked");
        t.state = TokenState::Burned;
        Ok(t.state)
    }

    pub(crate) fn check_srdt(&self, id: TokenId, tick: u64) -> Result<&SrdtToken> {
        let t = self.srdts.get(&id).ok_or(DdrmError::UnknownToken(id))?;
        usable(id, t.state, t.expiry_tick, tick)?;
        Ok(t)
    }

    pub(crate) fn consume_srdt(&mut self, id: TokenId, purpose: SrdtPurpose, tick: u64) -> Result<TokenState> {
        self.check_srdt(id, tick)?;
        let t = self.srdts.get_mut(&id).expect("checked");
        t.state = TokenState::Consumed;
        t.consumed_for = Some(purpose);
        Ok(t.state)
    }

    /// Voids every active token held by `holder`.
    pub(crate) fn void_all_held(&mut self, holder: ParticipantId) -> Vec<TokenId> {
        let mut voided = Vec::new();
        for t in self.srats.values_mut().filter(|t| t.holder == holder && t.state == TokenState::Active) {
            t.state = TokenState::Voided;
            voided.push(t.id);
        }
        for t in self.srdts.values_mut().filter(|t| t.holder == holder && t.state == TokenState::Active) {
            t.state = TokenState::Voided;
            voided.push(t.id);
        }
        voided.sort();
        voided
    }

    fn sweep(&mut self, tick: u64) -> Vec<TokenId> {
        let mut expired = Vec::new();
        for t in self.srats.values_mut().filter(|t| t.state == TokenState::Active && t.expiry_tick <= tick) {
            t.state = TokenState::Expired;
            expired.push(t.id);
        }
        for t in self.srdts.values_mut().filter(|t| t.state == TokenState::Active && t.expiry_tick <= tick) {
            t.state = TokenState::Expired;
            expired.push(t.id);
        }
        expired.sort();
        expired
    }
}

impl Ddrm {
    pub(crate) fn mint_srat(&mut self, holder: ParticipantId, service: ServiceId, purchase: PurchaseId) -> TokenId {
        assert!(
            !self.tokens.srat_by_purchase.contains_key(&purchase),
            "second SRAT for purchase {purchase}"
        );
        let tick = self.ledger.tick();
        let expiry_tick = tick + self.config.srat_lifetime;
        let id = self.tokens.fresh_id();
        self.tokens.srats.insert(
            id,
            SratToken { id, holder, service, purchase, minted_tick: tick, expiry_tick, state: TokenState::Active },
        );
        self.tokens.srat_by_purchase.insert(purchase, id);
        self.ledger.append(&Event::TokenMinted {
            token: id,
            kind: TokenKind::Srat,
            holder,
            service,
            purchase: Some(purchase),
            expiry_tick,
        });
        id
    }

    pub(crate) fn mint_srdt(&mut self, holder: ParticipantId, service: ServiceId) -> TokenId {
        let tick = self.ledger.tick();
        let expiry_tick = tick + self.config.srdt_lifetime;
        let id = self.tokens.fresh_id();
        self.tokens.srdts.insert(
            id,
            SrdtToken {
                id,
                holder,
                service,
                minted_tick: tick,
                expiry_tick,
                discount_bps: self.config.discount_bps,
                state: TokenState::Active,
                consumed_for: None,
            },
        );
        self.ledger.append(&Event::TokenMinted {
            token: id,
            kind: TokenKind::Srdt,
            holder,
            service,
            purchase: None,
            expiry_tick,
        });
        id
    }

    /// Pays out any DRET the service's provider has earned but not yet
    /// received. Returns the provider's DRET balance afterwards.
    pub fn award_dret(&mut self, service: ServiceId) -> Result<u64> {
        let listing = self.market.service(service).ok_or(DdrmError::UnknownService(service))?;
        let provider = listing.provider;
        let earned = listing.authentic_review_count / self.config.dret_k;
        let paid = self.tokens.dret_paid.get(&service).copied().unwrap_or(0);
        for _ in paid..earned {
            let total = {
                let c = self.tokens.dret.entry(provider).or_insert(0);
                *c += 1;
                *c
            };
            self.ledger.append(&Event::DretAwarded { provider, service, total });
        }
        if earned > paid {
            self.tokens.dret_paid.insert(service, earned);
        }
        Ok(self.tokens.dret_balance(provider))
    }

    /// Expires every active token whose expiry tick has been reached.
    /// Returns how many changed state.
    pub fn expiry_sweep(&mut self, tick: u64) -> usize {
        let expired = self.tokens.sweep(tick);
        let n = expired.len();
        if n > 0 {
            self.ledger.append(&Event::TokensExpired { tokens: expired });
        }
        n
    }
}
