//! The protocol state machine.
//!
//! [`Ddrm`] owns the ledger and every protocol table. Operations live next
//! to their domain types (`identity`, `marketplace`, `tokens`, `review`)
//! as `impl Ddrm` blocks. Each operation checks all of its preconditions
//! before touching state, so a failed call leaves the machine unchanged.

use serde::{Deserialize, Serialize};

use crate::identity::{ParticipantRecord, Registry, Role};
use crate::ids::{Address, ClaimId, ParticipantId, PurchaseId, ReviewId, ServiceId, TokenId};
use crate::ledger::{GasConfigError, GasOp, GasSchedule, Ledger, LedgerError};
use crate::marketplace::Market;
use crate::review::ReviewBook;
use crate::tokens::TokenStore;
use crate::wei::Wei;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Initial faucet balance; the closed-system total.
    pub faucet_supply: Wei,
    /// Credited to each participant at registration.
    pub faucet_grant: Wei,
    /// Seeded into a service's review fund at listing.
    pub listing_deposit: Wei,
    /// Released from the review fund per submitted review.
    pub review_subsidy: Wei,
    pub srat_lifetime: u64,
    pub srdt_lifetime: u64,
    /// SRDT purchase discount in basis points.
    pub discount_bps: u32,
    /// Authentic badges per DRET award.
    pub dret_k: u64,
    /// Votes a review needs before it can be badged.
    pub quorum: u32,
    /// Brand tied reviews Fraudulent instead of leaving them Pending.
    pub literal_alg2_ties: bool,
    /// Exclusion fires once a participant's fraudulent badges exceed this.
    pub penalty_threshold: u32,
    pub bootstrap_n: usize,
    /// How many of the earliest reviews feed the bootstrap draw.
    pub bootstrap_window: usize,
    pub panel_size: usize,
    pub claim_window: u64,
    pub voting_window: u64,
    pub refund_on_withdraw: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            faucet_supply: Wei::ether(1_000_000),
            faucet_grant: Wei::ether(10),
            listing_deposit: Wei::ether(1),
            review_subsidy: Wei::milli_ether(10),
            srat_lifetime: 100,
            srdt_lifetime: 200,
            discount_bps: 2_000,
            dret_k: 5,
            quorum: 3,
            literal_alg2_ties: false,
            penalty_threshold: 3,
            bootstrap_n: 5,
            bootstrap_window: 10,
            panel_size: 5,
            claim_window: 50,
            voting_window: 20,
            refund_on_withdraw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("discount_bps {0} exceeds 10000")]
    DiscountRange(u32),
    #[error("review_subsidy {subsidy} cannot cover submit_review gas {gas}")]
    SubsidyBelowGas { subsidy: Wei, gas: Wei },
    #[error(transparent)]
    Gas(#[from] GasConfigError),
}

impl ProtocolConfig {
    pub fn validate(&self, gas: &GasSchedule) -> Result<(), ConfigError> {
        let positive: [(&'static str, bool); 15] = [
            ("faucet_supply", !self.faucet_supply.is_zero()),
            ("faucet_grant", !self.faucet_grant.is_zero()),
            ("listing_deposit", !self.listing_deposit.is_zero()),
            ("review_subsidy", !self.review_subsidy.is_zero()),
            ("srat_lifetime", self.srat_lifetime > 0),
            ("srdt_lifetime", self.srdt_lifetime > 0),
            ("dret_k", self.dret_k > 0),
            ("quorum", self.quorum > 0),
            ("penalty_threshold", self.penalty_threshold > 0),
            ("bootstrap_n", self.bootstrap_n > 0),
            ("bootstrap_window", self.bootstrap_window > 0),
            ("panel_size", self.panel_size > 0),
            ("claim_window", self.claim_window > 0),
            ("voting_window", self.voting_window > 0),
            ("discount_bps", self.discount_bps > 0),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, ok)| !ok) {
            return Err(ConfigError::NotPositive(name));
        }
        if self.discount_bps > 10_000 {
            return Err(ConfigError::DiscountRange(self.discount_bps));
        }
        gas.validate()?;
        let review_gas = gas.cost(GasOp::SubmitReview);
        if self.review_subsidy < review_gas {
            return Err(ConfigError::SubsidyBelowGas { subsidy: self.review_subsidy, gas: review_gas });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DdrmError {
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: Wei, available: Wei },
    #[error("arithmetic overflow")]
    Overflow,
    #[error("unknown participant {0}")]
    UnknownParticipant(ParticipantId),
    #[error("unknown address {0}")]
    UnknownAddress(Address),
    #[error("participant {0} is excluded")]
    ParticipantExcluded(ParticipantId),
    #[error("card already bound to participant {0}")]
    DuplicateCard(ParticipantId),
    #[error("participant {0} lacks the {1:?} role")]
    MissingRole(ParticipantId, Role),
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("service {0} is withdrawn")]
    ServiceWithdrawn(ServiceId),
    #[error("caller does not own service {0}")]
    NotOwner(ServiceId),
    #[error("service price must be positive")]
    InvalidPrice,
    #[error("no purchase {0} by this consumer")]
    NoPurchase(PurchaseId),
    #[error("purchase {0} already reviewed")]
    AlreadyReviewed(PurchaseId),
    #[error("no valid SRAT for purchase {0}")]
    NoValidSrat(PurchaseId),
    #[error("review fund of {0} cannot cover the review subsidy")]
    FundExhausted(ServiceId),
    #[error("rating {0} outside 1..=5")]
    InvalidRating(u8),
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("token {0} is not active")]
    TokenNotActive(TokenId),
    #[error("token {0} has expired")]
    TokenExpired(TokenId),
    #[error("token {0} is held by someone else")]
    NotTokenHolder(TokenId),
    #[error("token {token} is bound to service {bound}, not {requested}")]
    WrongService { token: TokenId, bound: ServiceId, requested: ServiceId },
    #[error("participant {0} is not a selected endorser for service {1}")]
    NotSelectedEndorser(ParticipantId, ServiceId),
    #[error("participant {0} holds no valid SRDT for service {1}")]
    NoValidSrdt(ParticipantId, ServiceId),
    #[error("participant {0} already endorsed review {1}")]
    DuplicateEndorsement(ParticipantId, ReviewId),
    #[error("review {0} already carries a badge")]
    ReviewAlreadyBadged(ReviewId),
    #[error("unknown review {0}")]
    UnknownReview(ReviewId),
    #[error("service {0} has no reviews")]
    NoReviews(ServiceId),
    #[error("service {0} already has selected endorsers")]
    RosterNotEmpty(ServiceId),
    #[error("purchase {0} already refunded")]
    AlreadyRefunded(PurchaseId),
    #[error("purchase {0} already has a refund claim")]
    DuplicateClaim(PurchaseId),
    #[error("claim window for purchase {0} has closed")]
    ClaimWindowClosed(PurchaseId),
    #[error("no endorsers available to adjudicate service {0}")]
    NoEndorsersAvailable(ServiceId),
    #[error("unknown claim {0}")]
    UnknownClaim(ClaimId),
    #[error("participant {0} is not on the panel of claim {1}")]
    NotPanelMember(ParticipantId, ClaimId),
    #[error("participant {0} already voted on claim {1}")]
    DuplicateVote(ParticipantId, ClaimId),
    #[error("claim {0} is closed")]
    ClaimClosed(ClaimId),
    #[error("claim {0} is still collecting votes")]
    VotingStillOpen(ClaimId),
    #[error("cannot draw {requested} from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl From<LedgerError> for DdrmError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::InsufficientFunds { needed, available, .. } => {
                DdrmError::InsufficientFunds { needed, available }
            }
            LedgerError::UnknownAccount(a) => DdrmError::UnknownAddress(a),
            LedgerError::Overflow => DdrmError::Overflow,
            LedgerError::PoolTooSmall(p) => {
                DdrmError::PoolTooSmall { requested: p.requested, available: p.available }
            }
        }
    }
}

pub type Result<T, E = DdrmError> = std::result::Result<T, E>;

/// Who is sending a transaction: a participant id, or any of the
/// pseudonymous addresses bound to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Caller {
    Participant(ParticipantId),
    Address(Address),
}

impl From<ParticipantId> for Caller {
    fn from(p: ParticipantId) -> Self {
        Caller::Participant(p)
    }
}

impl From<Address> for Caller {
    fn from(a: Address) -> Self {
        Caller::Address(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ddrm {
    pub(crate) config: ProtocolConfig,
    pub(crate) ledger: Ledger,
    pub(crate) registry: Registry,
    pub(crate) market: Market,
    pub(crate) tokens: TokenStore,
    pub(crate) reviews: ReviewBook,
    audit: bool,
}

impl Ddrm {
    pub fn new(config: ProtocolConfig, gas: GasSchedule, seed: u64) -> Result<Self, ConfigError> {
        config.validate(&gas)?;
        let ledger = Ledger::new(config.faucet_supply, gas, seed);
        Ok(Ddrm {
            config,
            ledger,
            registry: Registry::new(seed),
            market: Market::default(),
            tokens: TokenStore::default(),
            reviews: ReviewBook::default(),
            audit: false,
        })
    }

    /// Defaults everywhere; handy for tests and examples.
    pub fn with_seed(seed: u64) -> Self {
        Ddrm::new(ProtocolConfig::default(), GasSchedule::default(), seed).expect("defaults are valid")
    }

    /// When on, every committed transaction re-checks value conservation.
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn tokens(&self) -> &TokenStore {
        &self.tokens
    }

    pub fn reviews(&self) -> &ReviewBook {
        &self.reviews
    }

    pub fn tick(&self) -> u64 {
        self.ledger.tick()
    }

    pub fn balance(&self, who: impl Into<Caller>) -> Result<Wei> {
        let p = self.resolve(who.into())?;
        Ok(self.ledger.balance(p.wallet()))
    }

    /// Sum of all account balances, the gas sink and every review fund.
    pub fn total_value(&self) -> Wei {
        [self.ledger.accounts_total(), self.ledger.gas_sink(), self.market.funds_total()]
            .into_iter()
            .sum()
    }

    pub fn check_conservation(&self) -> Result<()> {
        let total = self.total_value();
        if total != self.ledger.genesis_supply() {
            return Err(DdrmError::InvariantViolation(format!(
                "value not conserved: {} != genesis {}",
                total,
                self.ledger.genesis_supply()
            )));
        }
        Ok(())
    }

    /// Advances the block height by one and expires due tokens.
    pub fn advance_tick(&mut self) -> u64 {
        let tick = self.ledger.advance_tick();
        self.expiry_sweep(tick);
        tick
    }

    pub(crate) fn resolve(&self, caller: Caller) -> Result<&ParticipantRecord> {
        let id = match caller {
            Caller::Participant(id) => id,
            Caller::Address(a) => self.registry.owner_of(a).ok_or(DdrmError::UnknownAddress(a))?,
        };
        self.registry.get(id).ok_or(DdrmError::UnknownParticipant(id))
    }

    /// Resolves the caller and insists it is still active.
    pub(crate) fn active(&self, caller: Caller) -> Result<(ParticipantId, Address)> {
        let p = self.resolve(caller)?;
        if !p.is_active() {
            return Err(DdrmError::ParticipantExcluded(p.id));
        }
        Ok((p.id, p.wallet()))
    }

    pub(crate) fn committed(&self) -> Result<()> {
        if self.audit {
            self.check_conservation()?;
        }
        Ok(())
    }
}
