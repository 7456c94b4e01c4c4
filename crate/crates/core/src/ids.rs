//! Identifier newtypes and the 32-byte digest used across the crate.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl $name {
            #[allow(dead_code)]
            pub(crate) fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(ParticipantId, "P");
id_type!(ServiceId, "S");
id_type!(PurchaseId, "B");
id_type!(ReviewId, "R");
id_type!(TokenId, "T");
id_type!(ClaimId, "C");

fn hex_serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(bytes))
}

fn hex_deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
    let s = String::deserialize(d)?;
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(de::Error::custom("hex digits must be lowercase"));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(&s, &mut out).map_err(de::Error::custom)?;
    Ok(out)
}

/// SHA-256 output. Serialized as 64 lowercase hex characters.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        hex_serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        hex_deserialize::<D, 32>(d).map(Digest)
    }
}

/// Opaque 20-byte pseudonymous ledger address, shown as `0x…`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    /// Derives a fresh address from a namespace seed and a counter.
    pub fn derive(seed: u64, owner: u64, index: u64) -> Address {
        let mut h = Sha256::new();
        h.update(b"ddrm/address");
        h.update(seed.to_be_bytes());
        h.update(owner.to_be_bytes());
        h.update(index.to_be_bytes());
        let full: [u8; 32] = h.finalize().into();
        let mut out = [0u8; 20];
        out.copy_from_slice(&full[12..]);
        Address(out)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let body = s
            .strip_prefix("0x")
            .ok_or_else(|| de::Error::custom("address must start with 0x"))?;
        if body.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(de::Error::custom("hex digits must be lowercase"));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(body, &mut out).map_err(de::Error::custom)?;
        Ok(Address(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_test_vector() {
        // FIPS 180-2 "abc"
        assert_eq!(
            Digest::of(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn digest_hex_roundtrip_rejects_uppercase() {
        let d = Digest::of(b"x");
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Digest>(&json).unwrap(), d);
        let upper = json.to_uppercase();
        assert!(serde_json::from_str::<Digest>(&upper).is_err());
    }

    #[test]
    fn addresses_are_distinct_per_index() {
        let a = Address::derive(7, 1, 0);
        let b = Address::derive(7, 1, 1);
        assert_ne!(a, b);
        assert_eq!(a, Address::derive(7, 1, 0));
        assert!(a.to_string().starts_with("0x") && a.to_string().len() == 42);
    }
}
