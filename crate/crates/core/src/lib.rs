//! Deterministic smart derivative contract engine.
//!
//! The crate executes a bilateral derivative as a state machine over a
//! stable-coin ledger: margin buffers and termination fees sit in
//! segregated buckets, settlement amounts come from a pluggable valuation
//! oracle, and every ledger or lifecycle event lands in a SHA-256 hash
//! chain. The [`simulator`] module wraps all of it into seeded, reproducible
//! multi-party runs.

pub mod contract;
pub mod io;
pub mod journal;
pub mod ledger;
pub mod scheduler;
pub mod simulator;
pub mod valuation;

/// Simulated time: integer scheduling slots.
pub type Tick = u64;

pub use contract::{ContractSpec, ContractState, Party, SmartDerivative, TerminationCause};
pub use journal::{EventKind, EventRecord, Journal, JournalBlock};
pub use ledger::{AccountId, Amount, Bucket, ContractId, Ledger};
pub use scheduler::{build_timeline, Engine, Timeline, Trigger};
pub use valuation::{MarketSnapshot, ProductSpec, SettlementAmount};
