//! Append-only, hash-chained event journal.
//!
//! Every block commits to its position, its predecessor's digest and one
//! canonically encoded [`EventRecord`]:
//!
//! ```text
//! hash = SHA-256(index_be8 || prev_hash || payload)
//! ```
//!
//! The on-disk layout is a plain concatenation of blocks, each
//! `index(8, BE) || prev_hash(32) || payload_len(4, BE) || payload || hash(32)`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Tick;

/// Size of a block digest in bytes.
pub const HASH_LEN: usize = 32;

/// Actor name for records produced by the engine itself.
pub const SYSTEM_ACTOR: &str = "SYSTEM";

pub type Hash = [u8; HASH_LEN];

const GENESIS_PREV: Hash = [0u8; HASH_LEN];
const BLOCK_HEADER_LEN: usize = 8 + HASH_LEN + 4;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt journal: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed event record: {0}")]
pub struct DecodeError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Transfer,
    Approval,
    Burn,
    Lock,
    Release,
    StateTransition,
    Valuation,
    Settlement,
    Termination,
    Rejected,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::Transfer,
        EventKind::Approval,
        EventKind::Burn,
        EventKind::Lock,
        EventKind::Release,
        EventKind::StateTransition,
        EventKind::Valuation,
        EventKind::Settlement,
        EventKind::Termination,
        EventKind::Rejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Transfer => "Transfer",
            EventKind::Approval => "Approval",
            EventKind::Burn => "Burn",
            EventKind::Lock => "Lock",
            EventKind::Release => "Release",
            EventKind::StateTransition => "StateTransition",
            EventKind::Valuation => "Valuation",
            EventKind::Settlement => "Settlement",
            EventKind::Termination => "Termination",
            EventKind::Rejected => "Rejected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One journaled event. Details are kept in a `BTreeMap` so the encoding
/// order is fixed by key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub timestamp: Tick,
    pub kind: EventKind,
    pub actor: String,
    pub details: BTreeMap<String, String>,
}

impl EventRecord {
    pub fn new(timestamp: Tick, kind: EventKind, actor: impl Into<String>) -> Self {
        Self {
            timestamp,
            kind,
            actor: actor.into(),
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.details.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.details.get(key).map(String::as_str)
    }

    /// Canonical byte encoding: `timestamp(8, BE)`, then length-prefixed
    /// (`u32` BE) kind and actor, a `u32` BE detail count and each
    /// key/value pair length-prefixed in key order.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64);
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        put_str(&mut out, self.kind.as_str());
        put_str(&mut out, &self.actor);
        out.extend_from_slice(&(self.details.len() as u32).to_be_bytes());
        for (k, v) in &self.details {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        let timestamp = u64::from_be_bytes(cur.take_array::<8>()?);
        let kind_name = cur.take_str()?;
        let kind = EventKind::parse(&kind_name)
            .ok_or_else(|| DecodeError(format!("unknown event kind {kind_name:?}")))?;
        let actor = cur.take_str()?;
        let count = u32::from_be_bytes(cur.take_array::<4>()?);
        let mut details = BTreeMap::new();
        let mut last_key: Option<String> = None;
        for _ in 0..count {
            let k = cur.take_str()?;
            let v = cur.take_str()?;
            if last_key.as_ref().is_some_and(|prev| prev >= &k) {
                return Err(DecodeError("detail keys not in canonical order".into()));
            }
            last_key = Some(k.clone());
            details.insert(k, v);
        }
        if cur.pos != bytes.len() {
            return Err(DecodeError("trailing bytes".into()));
        }
        Ok(Self {
            timestamp,
            kind,
            actor,
            details,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| DecodeError("unexpected end of record".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take_array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn take_str(&mut self) -> Result<String, DecodeError> {
        let len = u32::from_be_bytes(self.take_array::<4>()?) as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| DecodeError("invalid utf-8".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JournalBlock {
    pub index: u64,
    pub prev_hash: Hash,
    pub payload: Vec<u8>,
    pub hash: Hash,
}

impl JournalBlock {
    pub fn compute_hash(index: u64, prev_hash: &Hash, payload: &[u8]) -> Hash {
        let mut h = Sha256::new();
        h.update(index.to_be_bytes());
        h.update(prev_hash);
        h.update(payload);
        h.finalize().into()
    }

    pub fn record(&self) -> Result<EventRecord, DecodeError> {
        EventRecord::decode(&self.payload)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.hash);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Journal {
    blocks: Vec<JournalBlock>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[JournalBlock] {
        &self.blocks
    }

    /// Raw mutable access to the chain. Anything changed here is caught by
    /// [`Journal::verify`]; audit tooling uses it to simulate tampering.
    pub fn blocks_mut(&mut self) -> &mut Vec<JournalBlock> {
        &mut self.blocks
    }

    pub fn append(&mut self, record: &EventRecord) -> &JournalBlock {
        let index = self.blocks.len() as u64;
        let prev_hash = self.blocks.last().map_or(GENESIS_PREV, |b| b.hash);
        let payload = record.encode();
        let hash = JournalBlock::compute_hash(index, &prev_hash, &payload);
        self.blocks.push(JournalBlock {
            index,
            prev_hash,
            payload,
            hash,
        });
        self.blocks.last().expect("just pushed")
    }

    pub fn verify(&self) -> bool {
        let mut prev = GENESIS_PREV;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.index != i as u64 || b.prev_hash != prev {
                return false;
            }
            if JournalBlock::compute_hash(b.index, &b.prev_hash, &b.payload) != b.hash {
                return false;
            }
            prev = b.hash;
        }
        true
    }

    pub fn last_hash(&self) -> Option<Hash> {
        self.blocks.last().map(|b| b.hash)
    }

    /// Hex digest of the chain head; all zeros for an empty journal.
    pub fn head_hex(&self) -> String {
        hex::encode(self.last_hash().unwrap_or(GENESIS_PREV))
    }

    /// Decodes every payload. Fails on the first malformed record.
    pub fn records(&self) -> Result<Vec<EventRecord>, DecodeError> {
        self.blocks.iter().map(JournalBlock::record).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            b.write_to(&mut out);
        }
        out
    }

    /// Parses the block layout and rejects anything that does not verify.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, JournalError> {
        let mut blocks = Vec::new();
        let mut pos = 0usize;
        while pos < bytes.len() {
            let rest = &bytes[pos..];
            if rest.len() < BLOCK_HEADER_LEN {
                return Err(JournalError::Corrupt(format!(
                    "truncated block header at byte {pos}"
                )));
            }
            let index = u64::from_be_bytes(rest[0..8].try_into().expect("8 bytes"));
            let prev_hash: Hash = rest[8..8 + HASH_LEN].try_into().expect("32 bytes");
            let len_off = 8 + HASH_LEN;
            let payload_len =
                u32::from_be_bytes(rest[len_off..len_off + 4].try_into().expect("4 bytes"))
                    as usize;
            let needed = BLOCK_HEADER_LEN + payload_len + HASH_LEN;
            if rest.len() < needed {
                return Err(JournalError::Corrupt(format!(
                    "truncated block {} at byte {pos}",
                    blocks.len()
                )));
            }
            let payload = rest[BLOCK_HEADER_LEN..BLOCK_HEADER_LEN + payload_len].to_vec();
            let hash: Hash = rest[BLOCK_HEADER_LEN + payload_len..needed]
                .try_into()
                .expect("32 bytes");
            blocks.push(JournalBlock {
                index,
                prev_hash,
                payload,
                hash,
            });
            pos += needed;
        }
        let journal = Self { blocks };
        if !journal.verify() {
            return Err(JournalError::Corrupt("hash chain does not verify".into()));
        }
        Ok(journal)
    }

    /// Writes the journal through a temporary file in the target directory.
    pub fn export(&self, path: &Path) -> Result<(), JournalError> {
        crate::io::write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self, JournalError> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}
