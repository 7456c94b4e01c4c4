//! Wei-denominated amounts with checked arithmetic.
//!
//! 1 Ether = 10^18 Wei, 1 Gwei = 10^9 Wei. Amounts never wrap: every
//! operation that could overflow or go negative returns `None` and the
//! caller turns that into a hard error.

use std::fmt;
use std::iter::Sum;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub const WEI_PER_GWEI: u128 = 1_000_000_000;
pub const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;

/// Serialized as a decimal string; JSON numbers cannot carry 128 bits
/// portably. Plain integers up to `u64::MAX` are also accepted on input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wei(pub u128);

impl Wei {
    pub const ZERO: Wei = Wei(0);
    pub const ONE_ETHER: Wei = Wei(WEI_PER_ETHER);
    pub const ONE_GWEI: Wei = Wei(WEI_PER_GWEI);

    pub const fn new(value: u128) -> Self {
        Wei(value)
    }

    pub const fn ether(n: u128) -> Self {
        Wei(n * WEI_PER_ETHER)
    }

    pub const fn gwei(n: u128) -> Self {
        Wei(n * WEI_PER_GWEI)
    }

    /// Milli-Ether, handy for test fixtures like 0.5 Ether = `milli_ether(500)`.
    pub const fn milli_ether(n: u128) -> Self {
        Wei(n * (WEI_PER_ETHER / 1_000))
    }

    pub const fn value(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Wei) -> Option<Wei> {
        self.0.checked_add(rhs.0).map(Wei)
    }

    pub fn checked_sub(self, rhs: Wei) -> Option<Wei> {
        self.0.checked_sub(rhs.0).map(Wei)
    }

    pub fn checked_mul(self, factor: u128) -> Option<Wei> {
        self.0.checked_mul(factor).map(Wei)
    }

    /// Scales by `(10_000 - bps) / 10_000`, rounding down.
    pub fn discounted(self, bps: u32) -> Option<Wei> {
        let keep = 10_000u128.checked_sub(u128::from(bps))?;
        Some(Wei(self.0.checked_mul(keep)? / 10_000))
    }

    /// Ether rounded half-up to `decimals` places, returned as an integer
    /// count of `10^-decimals` Ether.
    pub fn ether_units_rounded(self, decimals: u32) -> u128 {
        let unit = WEI_PER_ETHER / 10u128.pow(decimals);
        (self.0 + unit / 2) / unit
    }
}

impl fmt::Display for Wei {
    /// Exact Ether with trailing zeros trimmed, e.g. `8.999471 ETH`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / WEI_PER_ETHER;
        let frac = self.0 % WEI_PER_ETHER;
        if frac == 0 {
            return write!(f, "{whole} ETH");
        }
        let digits = format!("{frac:018}");
        write!(f, "{whole}.{} ETH", digits.trim_end_matches('0'))
    }
}

impl Serialize for Wei {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Wei {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Wei;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a Wei amount as a decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Wei, E> {
                Ok(Wei(u128::from(v)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Wei, E> {
                if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(E::custom(format!("invalid Wei amount {v:?}")));
                }
                v.parse::<u128>().map(Wei).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl From<u128> for Wei {
    fn from(value: u128) -> Self {
        Wei(value)
    }
}

/// Saturating is wrong for money; summing panics on overflow instead.
impl Sum for Wei {
    fn sum<I: Iterator<Item = Wei>>(iter: I) -> Self {
        iter.fold(Wei::ZERO, |acc, w| acc.checked_add(w).expect("Wei sum overflow"))
    }
}

impl<'a> Sum<&'a Wei> for Wei {
    fn sum<I: Iterator<Item = &'a Wei>>(iter: I) -> Self {
        iter.copied().sum()
    }
}
