//! Service listings, purchases and review-fund bookkeeping.
//!
//! Listing: provider pays `GC_AddS + deposit`, the fund gains `deposit`.
//! Purchase: consumer pays `GC_BuyS + sCost`, provider gains `sCost`, and
//! one SRAT is minted for the consumer.

use serde::{Deserialize, Serialize};

use crate::event::Event;
use crate::identity::Role;
use crate::ids::{ParticipantId, PurchaseId, ServiceId, TokenId};
use crate::ledger::GasOp;
use crate::protocol::{Caller, Ddrm, DdrmError, Result};
use crate::tokens::SrdtPurpose;
use crate::wei::Wei;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceStatus {
    Listed,
    Withdrawn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceListing {
    pub id: ServiceId,
    pub provider: ParticipantId,
    pub s_cost: Wei,
    pub review_fund: Wei,
    pub status: ServiceStatus,
    pub authentic_review_count: u64,
}

impl ServiceListing {
    pub fn is_listed(&self) -> bool {
        self.status == ServiceStatus::Listed
    }

    /// Still purchasable, but the fund cannot subsidize another review.
    pub fn is_review_starved(&self, subsidy: Wei) -> bool {
        self.review_fund < subsidy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurchaseRecord {
    pub id: PurchaseId,
    pub service: ServiceId,
    pub consumer: ParticipantId,
    pub price_paid: Wei,
    pub tick: u64,
    pub reviewed: bool,
    pub refunded: bool,
    pub discount_token: Option<TokenId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Market {
    services: Vec<ServiceListing>,
    purchases: Vec<PurchaseRecord>,
}

impl Market {
    pub fn service(&self, id: ServiceId) -> Option<&ServiceListing> {
        self.services.get(id.index())
    }

    pub(crate) fn service_mut(&mut self, id: ServiceId) -> Option<&mut ServiceListing> {
        self.services.get_mut(id.index())
    }

    pub fn purchase(&self, id: PurchaseId) -> Option<&PurchaseRecord> {
        self.purchases.get(id.index())
    }

    pub(crate) fn purchase_mut(&mut self, id: PurchaseId) -> Option<&mut PurchaseRecord> {
        self.purchases.get_mut(id.index())
    }

    pub fn services(&self) -> &[ServiceListing] {
        &self.services
    }

    pub fn purchases(&self) -> &[PurchaseRecord] {
        &self.purchases
    }

    pub fn funds_total(&self) -> Wei {
        self.services.iter().map(|s| s.review_fund).sum()
    }
}

impl Ddrm {
    fn owned_service(&self, caller: Caller, service: ServiceId) -> Result<(ParticipantId, crate::ids::Address)> {
        let (pid, wallet) = self.active(caller)?;
        let listing = self.market.service(service).ok_or(DdrmError::UnknownService(service))?;
        if listing.provider != pid {
            return Err(DdrmError::NotOwner(service));
        }
        Ok((pid, wallet))
    }

    fn need(&self, parts: &[Wei]) -> Result<Wei> {
        parts.iter().try_fold(Wei::ZERO, |acc, w| acc.checked_add(*w)).ok_or(DdrmError::Overflow)
    }

    /// Lists a new service and seeds its review fund with the listing deposit.
    pub fn add_service(&mut self, who: impl Into<Caller>, s_cost: Wei) -> Result<ServiceId> {
        let (pid, wallet) = self.active(who.into())?;
        if !self.registry.get(pid).expect("active").has_role(Role::ServiceProvider) {
            return Err(DdrmError::MissingRole(pid, Role::ServiceProvider));
        }
        if s_cost.is_zero() {
            return Err(DdrmError::InvalidPrice);
        }
        let deposit = self.config.listing_deposit;
        let need = self.need(&[self.ledger.gas_cost(GasOp::AddService), deposit])?;
        self.ledger.ensure_can_pay(wallet, need)?;

        self.ledger.charge_gas(wallet, GasOp::AddService)?;
        self.ledger.debit(wallet, deposit)?;
        let id = ServiceId(self.market.services.len() as u64);
        self.market.services.push(ServiceListing {
            id,
            provider: pid,
            s_cost,
            review_fund: deposit,
            status: ServiceStatus::Listed,
            authentic_review_count: 0,
        });
        self.ledger.append(&Event::ServiceListed { service: id, provider: pid, s_cost, deposit });
        self.committed()?;
        Ok(id)
    }

    /// Buys a service at its current price.
    pub fn buy_service(&mut self, who: impl Into<Caller>, service: ServiceId) -> Result<PurchaseId> {
        self.purchase(who.into(), service, None)
    }

    /// Buys a service at the SRDT discount, consuming the token.
    pub fn buy_service_discounted(
        &mut self,
        who: impl Into<Caller>,
        service: ServiceId,
        srdt: TokenId,
    ) -> Result<PurchaseId> {
        self.purchase(who.into(), service, Some(srdt))
    }

    fn purchase(&mut self, caller: Caller, service: ServiceId, srdt: Option<TokenId>) -> Result<PurchaseId> {
        let (pid, wallet) = self.active(caller)?;
        let listing = self.market.service(service).ok_or(DdrmError::UnknownService(service))?;
        if !listing.is_listed() {
            return Err(DdrmError::ServiceWithdrawn(service));
        }
        let provider = listing.provider;
        let mut price = listing.s_cost;
        let tick = self.ledger.tick();
        if let Some(t) = srdt {
            let token = self.tokens.check_srdt(t, tick)?;
            if token.holder != pid {
                return Err(DdrmError::NotTokenHolder(t));
            }
            if token.service != service {
                return Err(DdrmError::WrongService { token: t, bound: token.service, requested: service });
            }
            price = price.discounted(token.discount_bps).ok_or(DdrmError::Overflow)?;
        }
        let provider_wallet = self.registry.get(provider).expect("listed provider").wallet();
        let need = self.need(&[self.ledger.gas_cost(GasOp::RequestService), price])?;
        self.ledger.ensure_can_pay(wallet, need)?;

        self.ledger.charge_gas(wallet, GasOp::RequestService)?;
        self.ledger.transfer(wallet, provider_wallet, price)?;
        if let Some(t) = srdt {
            self.tokens.consume_srdt(t, SrdtPurpose::DiscountedPurchase, tick)?;
            self.ledger.append(&Event::SrdtConsumed {
                token: t,
                holder: pid,
                purpose: SrdtPurpose::DiscountedPurchase,
            });
        }
        let id = PurchaseId(self.market.purchases.len() as u64);
        self.market.purchases.push(PurchaseRecord {
            id,
            service,
            consumer: pid,
            price_paid: price,
            tick,
            reviewed: false,
            refunded: false,
            discount_token: srdt,
        });
        self.ledger.append(&Event::Purchased {
            purchase: id,
            service,
            consumer: pid,
            provider,
            price,
            discount_token: srdt,
        });
        self.mint_srat(pid, service, id);
        self.grant_role(pid, Role::Consumer);
        self.committed()?;
        Ok(id)
    }

    /// Changes the price for future purchases.
    pub fn modify_service(&mut self, who: impl Into<Caller>, service: ServiceId, new_cost: Wei) -> Result<()> {
        let (_, wallet) = self.owned_service(who.into(), service)?;
        let listing = self.market.service(service).expect("owned");
        if !listing.is_listed() {
            return Err(DdrmError::ServiceWithdrawn(service));
        }
        if new_cost.is_zero() {
            return Err(DdrmError::InvalidPrice);
        }
        let old_cost = listing.s_cost;
        self.ledger.charge_gas(wallet, GasOp::ModifyService)?;
        self.market.service_mut(service).expect("owned").s_cost = new_cost;
        self.ledger.append(&Event::ServiceRepriced { service, old_cost, new_cost });
        self.committed()
    }

    /// Delists a service. Its fund stays frozen unless `refund_on_withdraw`.
    pub fn withdraw_service(&mut self, who: impl Into<Caller>, service: ServiceId) -> Result<()> {
        let (_, wallet) = self.owned_service(who.into(), service)?;
        if !self.market.service(service).expect("owned").is_listed() {
            return Err(DdrmError::ServiceWithdrawn(service));
        }
        self.ledger.charge_gas(wallet, GasOp::WithdrawService)?;
        let listing = self.market.service_mut(service).expect("owned");
        listing.status = ServiceStatus::Withdrawn;
        let mut returned = Wei::ZERO;
        if self.config.refund_on_withdraw {
            returned = std::mem::take(&mut listing.review_fund);
            self.ledger.credit(wallet, returned)?;
        }
        self.ledger.append(&Event::ServiceWithdrawn { service, returned });
        self.committed()
    }

    /// Tops up a review fund from the provider's account. Zero is a no-op.
    pub fn replenish_fund(&mut self, who: impl Into<Caller>, service: ServiceId, amount: Wei) -> Result<Wei> {
        let (pid, wallet) = self.owned_service(who.into(), service)?;
        let listing = self.market.service(service).expect("owned");
        if amount.is_zero() {
            return Ok(listing.review_fund);
        }
        if !listing.is_listed() {
            return Err(DdrmError::ServiceWithdrawn(service));
        }
        let balance = listing.review_fund.checked_add(amount).ok_or(DdrmError::Overflow)?;
        let need = self.need(&[self.ledger.gas_cost(GasOp::ReplenishFund), amount])?;
        self.ledger.ensure_can_pay(wallet, need)?;

        self.ledger.charge_gas(wallet, GasOp::ReplenishFund)?;
        self.ledger.debit(wallet, amount)?;
        self.market.service_mut(service).expect("owned").review_fund = balance;
        self.ledger.append(&Event::FundReplenished { service, provider: pid, amount, balance });
        self.committed()?;
        Ok(balance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::CardFingerprint;
    use crate::ledger::GasSchedule;

    const ADD_GAS: Wei = Wei(528_681_600_000_000);
    const BUY_GAS: Wei = Wei(184_988_100_000_000);

    fn setup() -> (Ddrm, ParticipantId, ParticipantId) {
        let mut sim = Ddrm::with_seed(11);
        sim.set_audit(true);
        let sp = sim.register(CardFingerprint::from_card("sp"), &[Role::ServiceProvider]).unwrap();
        let c = sim.register(CardFingerprint::from_card("c"), &[Role::Consumer]).unwrap();
        (sim, sp, c)
    }

    #[test]
    fn listing_debits_gas_plus_deposit() {
        let (mut sim, sp, _) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        // 10 - 0.000528681600000000 - 1
        assert_eq!(sim.balance(sp).unwrap(), Wei(8_999_471_318_400_000_000));
        assert_eq!(sim.market().service(s).unwrap().review_fund, Wei::ether(1));
        assert_eq!(
            sim.balance(sp).unwrap().value() / 10u128.pow(12),
            8_999_471,
            "8.999471 Ether at micro-Ether precision"
        );
        assert_eq!(ADD_GAS, GasSchedule::default().cost(GasOp::AddService));
    }

    #[test]
    fn failed_calls_leave_state_unchanged() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::ether(10)).unwrap();
        let before = sim.clone();
        // exactly 10 Ether on hand, price plus gas exceeds it
        assert!(matches!(sim.buy_service(c, s), Err(DdrmError::InsufficientFunds { .. })));
        assert_eq!(sim, before);
        assert!(matches!(sim.add_service(c, Wei::ether(1)), Err(DdrmError::MissingRole(..))));
        assert_eq!(sim, before);
    }

    #[test]
    fn half_ether_balance_cannot_list() {
        let cfg = crate::protocol::ProtocolConfig { faucet_grant: Wei::milli_ether(500), ..Default::default() };
        let mut sim = Ddrm::new(cfg, GasSchedule::default(), 0).unwrap();
        let sp = sim.register(CardFingerprint::from_card("sp"), &[Role::ServiceProvider]).unwrap();
        let before = sim.clone();
        assert!(matches!(sim.add_service(sp, Wei::ether(1)), Err(DdrmError::InsufficientFunds { .. })));
        assert_eq!(sim, before);
        assert!(sim.market().services().is_empty());
    }

    #[test]
    fn two_listings_two_funds() {
        let (mut sim, sp, _) = setup();
        let a = sim.add_service(sp, Wei::ether(1)).unwrap();
        let b = sim.add_service(sp, Wei::ether(1)).unwrap();
        assert_ne!(a, b);
        assert_eq!(sim.market().funds_total(), Wei::ether(2));
    }

    #[test]
    fn purchase_moves_price_and_mints_srat() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        let sp_before = sim.balance(sp).unwrap();
        let p = sim.buy_service(c, s).unwrap();
        // 10 - 0.5 - 0.0001849881
        assert_eq!(sim.balance(c).unwrap(), Wei(9_499_815_011_900_000_000));
        assert_eq!(sim.balance(sp).unwrap(), sp_before.checked_add(Wei::milli_ether(500)).unwrap());
        assert_eq!(sim.tokens().srat_balance(c), 1);
        assert_eq!(sim.tokens().srat_for_purchase(p).unwrap().holder, c);
    }

    #[test]
    fn spec_example_two_ether_consumer() {
        let cfg = crate::protocol::ProtocolConfig { faucet_grant: Wei::ether(2), ..Default::default() };
        let mut sim = Ddrm::new(cfg, GasSchedule::default(), 0).unwrap();
        let sp = sim.register(CardFingerprint::from_card("sp"), &[Role::ServiceProvider]).unwrap();
        let c = sim.register(CardFingerprint::from_card("c"), &[]).unwrap();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        sim.buy_service(c, s).unwrap();
        let bal = sim.balance(c).unwrap();
        assert_eq!(bal, Wei(2 * 10u128.pow(18) - 5 * 10u128.pow(17) - BUY_GAS.value()));
        assert_eq!(bal.ether_units_rounded(6), 1_499_815);
    }

    #[test]
    fn price_equal_to_balance_leaves_gas_unpaid() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::ether(10)).unwrap();
        let before = sim.clone();
        assert!(matches!(sim.buy_service(c, s), Err(DdrmError::InsufficientFunds { .. })));
        assert_eq!(sim, before);
    }

    #[test]
    fn repurchase_mints_second_srat() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(100)).unwrap();
        let a = sim.buy_service(c, s).unwrap();
        let b = sim.buy_service(c, s).unwrap();
        assert_ne!(a, b);
        assert_eq!(sim.tokens().srat_balance(c), 2);
    }

    #[test]
    fn modify_affects_only_future_purchases() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        let first = sim.buy_service(c, s).unwrap();
        sim.modify_service(sp, s, Wei::milli_ether(800)).unwrap();
        let before = sim.balance(c).unwrap();
        let second = sim.buy_service(c, s).unwrap();
        let spent = before.checked_sub(sim.balance(c).unwrap()).unwrap();
        assert_eq!(spent, Wei::milli_ether(800).checked_add(BUY_GAS).unwrap());
        assert_eq!(sim.market().purchase(first).unwrap().price_paid, Wei::milli_ether(500));
        assert_eq!(sim.market().purchase(second).unwrap().price_paid, Wei::milli_ether(800));
    }

    #[test]
    fn withdrawn_service_rejects_purchases() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        sim.withdraw_service(sp, s).unwrap();
        assert_eq!(sim.buy_service(c, s), Err(DdrmError::ServiceWithdrawn(s)));
        // frozen by default
        assert_eq!(sim.market().service(s).unwrap().review_fund, Wei::ether(1));
    }

    #[test]
    fn refund_on_withdraw_returns_fund() {
        let cfg = crate::protocol::ProtocolConfig { refund_on_withdraw: true, ..Default::default() };
        let mut sim = Ddrm::new(cfg, GasSchedule::default(), 0).unwrap();
        sim.set_audit(true);
        let sp = sim.register(CardFingerprint::from_card("sp"), &[Role::ServiceProvider]).unwrap();
        let s = sim.add_service(sp, Wei::ether(1)).unwrap();
        let before = sim.balance(sp).unwrap();
        sim.withdraw_service(sp, s).unwrap();
        let gas = GasSchedule::default().cost(GasOp::WithdrawService);
        assert_eq!(sim.balance(sp).unwrap(), before.checked_sub(gas).unwrap().checked_add(Wei::ether(1)).unwrap());
        assert_eq!(sim.market().funds_total(), Wei::ZERO);
    }

    #[test]
    fn non_owner_cannot_modify() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        assert_eq!(sim.modify_service(c, s, Wei::ether(1)), Err(DdrmError::NotOwner(s)));
        assert_eq!(sim.withdraw_service(c, s), Err(DdrmError::NotOwner(s)));
        assert_eq!(
            sim.modify_service(sp, ServiceId(7), Wei::ether(1)),
            Err(DdrmError::UnknownService(ServiceId(7)))
        );
    }

    #[test]
    fn replenish_rules() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::milli_ether(500)).unwrap();
        assert_eq!(sim.replenish_fund(sp, s, Wei::ZERO), Ok(Wei::ether(1)));
        assert_eq!(sim.replenish_fund(c, s, Wei::ether(1)), Err(DdrmError::NotOwner(s)));
        assert_eq!(sim.replenish_fund(sp, s, Wei::ether(1)), Ok(Wei::ether(2)));
        assert!(matches!(
            sim.replenish_fund(sp, s, Wei::ether(100)),
            Err(DdrmError::InsufficientFunds { .. })
        ));
    }

    #[test]
    fn discounted_purchase_consumes_srdt() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::ether(1)).unwrap();
        let t = sim.mint_srdt(c, s);
        let before = sim.balance(c).unwrap();
        sim.buy_service_discounted(c, s, t).unwrap();
        let spent = before.checked_sub(sim.balance(c).unwrap()).unwrap();
        assert_eq!(spent, Wei::milli_ether(800).checked_add(BUY_GAS).unwrap());
        assert_eq!(sim.tokens().srdt(t).unwrap().consumed_for, Some(SrdtPurpose::DiscountedPurchase));
        assert_eq!(sim.buy_service_discounted(c, s, t), Err(DdrmError::TokenNotActive(t)));
    }

    #[test]
    fn discount_token_must_match_holder_and_service() {
        let (mut sim, sp, c) = setup();
        let s = sim.add_service(sp, Wei::ether(1)).unwrap();
        let other = sim.add_service(sp, Wei::ether(1)).unwrap();
        let t = sim.mint_srdt(c, s);
        assert!(matches!(sim.buy_service_discounted(c, other, t), Err(DdrmError::WrongService { .. })));
        assert_eq!(sim.buy_service_discounted(sp, s, t), Err(DdrmError::NotTokenHolder(t)));
    }
}
