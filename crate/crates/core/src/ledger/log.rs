//! Hash-chained event log.
//!
//! Record hash is SHA-256 over, in order:
//!   1. the ASCII tag `ddrm/event/v1`
//!   2. `seq` as 8-byte big-endian
//!   3. `tick` as 8-byte big-endian
//!   4. `kind` length (4-byte big-endian) then its UTF-8 bytes
//!   5. `payload` length (8-byte big-endian) then its UTF-8 bytes
//!   6. the 32-byte `prev_hash`
//!
//! The first record links to the all-zero digest. Exported logs are
//! newline-delimited JSON, one record per line, digests as lowercase hex.
//! A line is accepted only if re-serializing the parsed record reproduces
//! it byte for byte, so there is exactly one valid spelling of every log.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::ids::Digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub seq: u64,
    pub tick: u64,
    pub kind: String,
    /// Canonical JSON encoding of the event body.
    pub payload: String,
    pub prev_hash: Digest,
    pub hash: Digest,
}

impl EventRecord {
    pub fn compute_hash(seq: u64, tick: u64, kind: &str, payload: &str, prev_hash: &Digest) -> Digest {
        let mut h = Sha256::new();
        h.update(b"ddrm/event/v1");
        h.update(seq.to_be_bytes());
        h.update(tick.to_be_bytes());
        h.update((kind.len() as u32).to_be_bytes());
        h.update(kind.as_bytes());
        h.update((payload.len() as u64).to_be_bytes());
        h.update(payload.as_bytes());
        h.update(prev_hash.0);
        Digest(h.finalize().into())
    }

    pub fn recompute_hash(&self) -> Digest {
        Self::compute_hash(self.seq, self.tick, &self.kind, &self.payload, &self.prev_hash)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("EventRecord serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainBreakReason {
    #[error("sequence number {found} where {expected} was expected")]
    Sequence { expected: u64, found: u64 },
    #[error("tick went backwards from {previous} to {found}")]
    TickRegressed { previous: u64, found: u64 },
    #[error("prev_hash does not link to the preceding record")]
    Link,
    #[error("stored hash does not match record contents")]
    Hash,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("chain broken at seq {seq}: {reason}")]
pub struct ChainBreak {
    pub seq: u64,
    pub reason: ChainBreakReason,
}

/// Checks linkage, hashes, sequence numbering and tick order.
/// An empty slice is a valid chain.
pub fn verify_chain(records: &[EventRecord]) -> Result<(), ChainBreak> {
    let mut prev = Digest::ZERO;
    let mut prev_tick = 0;
    for (i, r) in records.iter().enumerate() {
        let expected = i as u64;
        // Report the position, not the (possibly forged) stored seq.
        let at = expected;
        if r.seq != expected {
            return Err(ChainBreak { seq: at, reason: ChainBreakReason::Sequence { expected, found: r.seq } });
        }
        if r.tick < prev_tick {
            return Err(ChainBreak {
                seq: at,
                reason: ChainBreakReason::TickRegressed { previous: prev_tick, found: r.tick },
            });
        }
        if r.prev_hash != prev {
            return Err(ChainBreak { seq: at, reason: ChainBreakReason::Link });
        }
        if r.recompute_hash() != r.hash {
            return Err(ChainBreak { seq: at, reason: ChainBreakReason::Hash });
        }
        prev = r.hash;
        prev_tick = r.tick;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: not in canonical form")]
    NonCanonical { line: usize },
    #[error("log must end with a newline")]
    MissingTrailingNewline,
}

/// Serializes records as newline-delimited JSON with LF endings.
pub fn to_ndjson(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

/// Strict inverse of [`to_ndjson`].
pub fn parse_ndjson(text: &str) -> Result<Vec<EventRecord>, LogParseError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let body = text.strip_suffix('\n').ok_or(LogParseError::MissingTrailingNewline)?;
    let mut records = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let record: EventRecord = serde_json::from_str(line)
            .map_err(|e| LogParseError::Malformed { line: line_no, message: e.to_string() })?;
        if record.to_json_line() != line {
            return Err(LogParseError::NonCanonical { line: line_no });
        }
        records.push(record);
    }
    Ok(records)
}

/// Append-only sequence of records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, tick: u64, kind: &str, payload: String) -> &EventRecord {
        let seq = self.records.len() as u64;
        let prev_hash = self.head_hash();
        let hash = EventRecord::compute_hash(seq, tick, kind, &payload, &prev_hash);
        self.records.push(EventRecord { seq, tick, kind: kind.to_string(), payload, prev_hash, hash });
        self.records.last().expect("just pushed")
    }

    /// Hash of the last record, or the zero digest for an empty log.
    pub fn head_hash(&self) -> Digest {
        self.records.last().map(|r| r.hash).unwrap_or(Digest::ZERO)
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn verify(&self) -> Result<(), ChainBreak> {
        verify_chain(&self.records)
    }

    pub fn to_ndjson(&self) -> String {
        to_ndjson(&self.records)
    }
}
