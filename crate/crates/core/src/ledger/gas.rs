//! Gas schedule. Defaults are the measured Ropsten figures for the
//! three contract calls that were benchmarked; the remaining state-writing
//! calls reuse the request-service figures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::wei::Wei;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GasOp {
    AddService,
    RequestService,
    SubmitReview,
    EndorseReview,
    ModifyService,
    WithdrawService,
    ReplenishFund,
    FileRefundClaim,
    VoteRefund,
}

impl GasOp {
    pub const ALL: [GasOp; 9] = [
        GasOp::AddService,
        GasOp::RequestService,
        GasOp::SubmitReview,
        GasOp::EndorseReview,
        GasOp::ModifyService,
        GasOp::WithdrawService,
        GasOp::ReplenishFund,
        GasOp::FileRefundClaim,
        GasOp::VoteRefund,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GasOp::AddService => "add_service",
            GasOp::RequestService => "request_service",
            GasOp::SubmitReview => "submit_review",
            GasOp::EndorseReview => "endorse_review",
            GasOp::ModifyService => "modify_service",
            GasOp::WithdrawService => "withdraw_service",
            GasOp::ReplenishFund => "replenish_fund",
            GasOp::FileRefundClaim => "file_refund_claim",
            GasOp::VoteRefund => "vote_refund",
        }
    }
}

impl fmt::Display for GasOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasEntry {
    /// Cap on units a call may consume.
    pub limit: u64,
    /// Units actually billed.
    pub used: u64,
}

impl GasEntry {
    pub const fn new(limit: u64, used: u64) -> Self {
        GasEntry { limit, used }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GasConfigError {
    #[error("gas price must be positive")]
    ZeroPrice,
    #[error("{0}: gas units must be positive")]
    ZeroUnits(GasOp),
    #[error("{op}: gas used {used} exceeds limit {limit}")]
    OverLimit { op: GasOp, used: u64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasSchedule {
    /// Wei per gas unit.
    pub gas_price: Wei,
    pub add_service: GasEntry,
    pub request_service: GasEntry,
    pub submit_review: GasEntry,
    pub endorse_review: GasEntry,
    pub modify_service: GasEntry,
    pub withdraw_service: GasEntry,
    pub replenish_fund: GasEntry,
    pub file_refund_claim: GasEntry,
    pub vote_refund: GasEntry,
}

const REQUEST_SERVICE: GasEntry = GasEntry::new(99_872, 63_789);

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            // 2.9 Gwei
            gas_price: Wei(2_900_000_000),
            add_service: GasEntry::new(272_456, 182_304),
            request_service: REQUEST_SERVICE,
            submit_review: REQUEST_SERVICE,
            endorse_review: GasEntry::new(106_754, 86_532),
            modify_service: REQUEST_SERVICE,
            withdraw_service: REQUEST_SERVICE,
            replenish_fund: REQUEST_SERVICE,
            file_refund_claim: REQUEST_SERVICE,
            vote_refund: REQUEST_SERVICE,
        }
    }
}

impl GasSchedule {
    pub fn entry(&self, op: GasOp) -> GasEntry {
        match op {
            GasOp::AddService => self.add_service,
            GasOp::RequestService => self.request_service,
            GasOp::SubmitReview => self.submit_review,
            GasOp::EndorseReview => self.endorse_review,
            GasOp::ModifyService => self.modify_service,
            GasOp::WithdrawService => self.withdraw_service,
            GasOp::ReplenishFund => self.replenish_fund,
            GasOp::FileRefundClaim => self.file_refund_claim,
            GasOp::VoteRefund => self.vote_refund,
        }
    }

    /// `used × gas_price`. Overflow is impossible for validated schedules
    /// (u64 × u128 headroom), so this panics rather than returning a Result.
    pub fn cost(&self, op: GasOp) -> Wei {
        self.gas_price
            .checked_mul(u128::from(self.entry(op).used))
            .expect("gas cost overflow")
    }

    pub fn validate(&self) -> Result<(), GasConfigError> {
        if self.gas_price.is_zero() {
            return Err(GasConfigError::ZeroPrice);
        }
        for op in GasOp::ALL {
            let e = self.entry(op);
            if e.used == 0 || e.limit == 0 {
                return Err(GasConfigError::ZeroUnits(op));
            }
            if e.used > e.limit {
                return Err(GasConfigError::OverLimit { op, used: e.used, limit: e.limit });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_costs() {
        let g = GasSchedule::default();
        assert_eq!(g.cost(GasOp::AddService), Wei(528_681_600_000_000));
        assert_eq!(g.cost(GasOp::RequestService), Wei(184_988_100_000_000));
        assert_eq!(g.cost(GasOp::EndorseReview), Wei(250_942_800_000_000));
        g.validate().unwrap();
    }

    #[test]
    fn limit_is_a_cap() {
        let mut g = GasSchedule::default();
        g.add_service.used = g.add_service.limit + 1;
        assert!(matches!(g.validate(), Err(GasConfigError::OverLimit { op: GasOp::AddService, .. })));
        g = GasSchedule::default();
        g.gas_price = Wei::ZERO;
        assert_eq!(g.validate(), Err(GasConfigError::ZeroPrice));
    }
}
