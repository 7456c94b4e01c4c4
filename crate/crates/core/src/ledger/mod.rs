//! Simulated ledger: balances, gas metering, block ticks, the randomness
//! beacon and the hash-chained event log.
//!
//! Value only moves between accounts, the gas sink, and (via the protocol
//! layer) service review funds. The faucet account holds the genesis
//! supply, so the grand total never changes.

pub mod beacon;
pub mod gas;
pub mod log;

use std::collections::BTreeMap;

use crate::event::{Event, Payer};
use crate::ids::{Address, Digest};
use crate::wei::Wei;

pub use beacon::{PoolTooSmall, RandomBeacon};
pub use gas::{GasConfigError, GasEntry, GasOp, GasSchedule};
pub use log::{parse_ndjson, to_ndjson, verify_chain, ChainBreak, ChainBreakReason, EventLog, EventRecord, LogParseError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("insufficient funds in {account}: need {needed}, have {available}")]
    InsufficientFunds { account: Address, needed: Wei, available: Wei },
    #[error("unknown account {0}")]
    UnknownAccount(Address),
    #[error("arithmetic overflow")]
    Overflow,
    #[error(transparent)]
    PoolTooSmall(#[from] PoolTooSmall),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    accounts: BTreeMap<Address, Wei>,
    /// Cumulative debits per account, for spend accounting.
    outflows: BTreeMap<Address, Wei>,
    gas_sink: Wei,
    genesis_supply: Wei,
    faucet: Address,
    schedule: GasSchedule,
    tick: u64,
    beacon: RandomBeacon,
    log: EventLog,
}

impl Ledger {
    /// Opens a ledger whose faucet holds `genesis_supply` and records the
    /// genesis event.
    pub fn new(genesis_supply: Wei, schedule: GasSchedule, seed: u64) -> Self {
        let faucet = Address::ZERO;
        let mut ledger = Ledger {
            accounts: BTreeMap::from([(faucet, genesis_supply)]),
            outflows: BTreeMap::new(),
            gas_sink: Wei::ZERO,
            genesis_supply,
            faucet,
            schedule,
            tick: 0,
            beacon: RandomBeacon::new(seed),
            log: EventLog::new(),
        };
        ledger.append(&Event::Genesis { faucet, supply: genesis_supply, seed });
        ledger
    }

    pub fn faucet(&self) -> Address {
        self.faucet
    }

    pub fn genesis_supply(&self) -> Wei {
        self.genesis_supply
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn gas_cost(&self, op: GasOp) -> Wei {
        self.schedule.cost(op)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn gas_sink(&self) -> Wei {
        self.gas_sink
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn head_hash(&self) -> Digest {
        self.log.head_hash()
    }

    pub fn beacon(&self) -> &RandomBeacon {
        &self.beacon
    }

    pub fn has_account(&self, addr: Address) -> bool {
        self.accounts.contains_key(&addr)
    }

    pub fn balance(&self, addr: Address) -> Wei {
        self.accounts.get(&addr).copied().unwrap_or(Wei::ZERO)
    }

    pub fn outflow(&self, addr: Address) -> Wei {
        self.outflows.get(&addr).copied().unwrap_or(Wei::ZERO)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &Wei)> {
        self.accounts.iter()
    }

    pub fn accounts_total(&self) -> Wei {
        self.accounts.values().sum()
    }

    pub(crate) fn open_account(&mut self, addr: Address) {
        self.accounts.entry(addr).or_insert(Wei::ZERO);
    }

    /// Fails unless `addr` can pay `amount` right now.
    pub fn ensure_can_pay(&self, addr: Address, amount: Wei) -> Result<(), LedgerError> {
        let available = *self.accounts.get(&addr).ok_or(LedgerError::UnknownAccount(addr))?;
        if available < amount {
            return Err(LedgerError::InsufficientFunds { account: addr, needed: amount, available });
        }
        Ok(())
    }

    pub(crate) fn debit(&mut self, addr: Address, amount: Wei) -> Result<(), LedgerError> {
        self.ensure_can_pay(addr, amount)?;
        let bal = self.accounts.get_mut(&addr).expect("checked above");
        *bal = bal.checked_sub(amount).ok_or(LedgerError::Overflow)?;
        let out = self.outflows.entry(addr).or_insert(Wei::ZERO);
        *out = out.checked_add(amount).ok_or(LedgerError::Overflow)?;
        Ok(())
    }

    pub(crate) fn credit(&mut self, addr: Address, amount: Wei) -> Result<(), LedgerError> {
        let bal = self.accounts.get_mut(&addr).ok_or(LedgerError::UnknownAccount(addr))?;
        *bal = bal.checked_add(amount).ok_or(LedgerError::Overflow)?;
        Ok(())
    }

    pub(crate) fn transfer(&mut self, from: Address, to: Address, amount: Wei) -> Result<(), LedgerError> {
        if !self.accounts.contains_key(&to) {
            return Err(LedgerError::UnknownAccount(to));
        }
        self.debit(from, amount)?;
        self.credit(to, amount)
    }

    /// Debits `gas_used(op) × gas_price` from `payer` into the gas sink and
    /// logs it. Nothing changes if the payer cannot cover the charge.
    pub fn charge_gas(&mut self, payer: Address, op: GasOp) -> Result<Wei, LedgerError> {
        let amount = self.schedule.cost(op);
        self.debit(payer, amount)?;
        self.gas_sink = self.gas_sink.checked_add(amount).ok_or(LedgerError::Overflow)?;
        self.append(&Event::GasCharged { payer: Payer::Account(payer), op, amount });
        Ok(amount)
    }

    /// Credits the gas sink with value already removed from a review fund.
    pub(crate) fn absorb_gas(&mut self, amount: Wei) -> Result<(), LedgerError> {
        self.gas_sink = self.gas_sink.checked_add(amount).ok_or(LedgerError::Overflow)?;
        Ok(())
    }

    pub fn append(&mut self, event: &Event) -> &EventRecord {
        let payload = serde_json::to_string(event).expect("events serialize");
        self.log.append(self.tick, event.kind(), payload)
    }

    /// Moves to the next block height. Token expiry is driven by the
    /// protocol layer, which calls this.
    pub(crate) fn advance_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    pub fn beacon_draw<T: Ord + Clone>(&mut self, pool: &[T], k: usize) -> Result<Vec<T>, LedgerError> {
        Ok(self.beacon.draw(pool, k)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> (Ledger, Address) {
        let mut l = Ledger::new(Wei::ether(1_000), GasSchedule::default(), 7);
        let a = Address::derive(7, 1, 0);
        l.open_account(a);
        (l, a)
    }

    #[test]
    fn gas_charge_moves_value_to_sink() {
        let (mut l, a) = ledger();
        l.transfer(l.faucet(), a, Wei::ether(10)).unwrap();
        let charged = l.charge_gas(a, GasOp::AddService).unwrap();
        assert_eq!(charged, Wei(528_681_600_000_000));
        assert_eq!(l.balance(a), Wei(10 * 10u128.pow(18) - 528_681_600_000_000));
        assert_eq!(l.gas_sink(), charged);
        assert_eq!(l.accounts_total().checked_add(l.gas_sink()), Some(Wei::ether(1_000)));
        assert_eq!(l.log().records().last().unwrap().kind, "gas_charged");
    }

    #[test]
    fn empty_account_cannot_pay_gas() {
        let (mut l, a) = ledger();
        let before = l.clone();
        let err = l.charge_gas(a, GasOp::RequestService).unwrap_err();
        assert!(matches!(err, LedgerError::InsufficientFunds { .. }));
        assert_eq!(l, before);
    }

    #[test]
    fn ticks_advance_by_one() {
        let (mut l, _) = ledger();
        assert_eq!(l.advance_tick(), 1);
        for _ in 0..99 {
            l.advance_tick();
        }
        assert_eq!(l.tick(), 100);
    }

    #[test]
    fn genesis_event_is_first() {
        let (l, _) = ledger();
        let first = &l.log().records()[0];
        assert_eq!(first.kind, "genesis");
        assert_eq!(first.prev_hash, Digest::ZERO);
    }
}
