//! The smart derivative contract state machine.
//!
//! ```text
//! PreCheck ──► AccountsOpen ──► MarginCheck ──► AwaitValuation ──► MarginCalculation
//!                   ▲                │                 │                  │
//!                   │                ▼                 ▼                  ├──► Terminated{SETTLEMENT_FAILED}
//!                   │   Terminated{INSUFFICIENT_PREFUND}  Error            ├──► Terminated{MATURED}
//!                   └──────────────── Settled ◄──────────────────────────┘
//! ```
//!
//! Every transition is journaled as a `StateTransition` record carrying the
//! timeline event that caused it. Terminated and Error are absorbing.

use std::fmt;

use thiserror::Error;

use crate::journal::{EventKind, EventRecord};
use crate::ledger::{AccountId, Amount, Bucket, ContractId, Ledger, LedgerError};
use crate::scheduler::Trigger;
use crate::valuation::{OracleBinding, ProductSpec, SettlementAmount};
use crate::Tick;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TerminationCause {
    InsufficientPrefund,
    SettlementFailed,
    Matured,
}

impl TerminationCause {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationCause::InsufficientPrefund => "INSUFFICIENT_PREFUND",
            TerminationCause::SettlementFailed => "SETTLEMENT_FAILED",
            TerminationCause::Matured => "MATURED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::InsufficientPrefund, Self::SettlementFailed, Self::Matured]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContractState {
    PreCheck,
    AccountsOpen { until: Tick },
    MarginCheck,
    AwaitValuation { settle_at: Tick },
    MarginCalculation,
    Settled { cycle: usize },
    Terminated { cause: TerminationCause, at: Tick },
    Error { detail: String },
}

impl ContractState {
    pub fn name(&self) -> &'static str {
        match self {
            ContractState::PreCheck => "PreCheck",
            ContractState::AccountsOpen { .. } => "AccountsOpen",
            ContractState::MarginCheck => "MarginCheck",
            ContractState::AwaitValuation { .. } => "AwaitValuation",
            ContractState::MarginCalculation => "MarginCalculation",
            ContractState::Settled { .. } => "Settled",
            ContractState::Terminated { .. } => "Terminated",
            ContractState::Error { .. } => "Error",
        }
    }

    pub fn is_absorbing(&self) -> bool {
        matches!(self, ContractState::Terminated { .. } | ContractState::Error { .. })
    }

    pub fn is_open(&self) -> bool {
        matches!(self, ContractState::AccountsOpen { .. })
    }

    pub fn termination(&self) -> Option<(TerminationCause, Tick)> {
        match self {
            ContractState::Terminated { cause, at } => Some((*cause, *at)),
            _ => None,
        }
    }
}

impl fmt::Display for ContractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractState::AccountsOpen { until } => write!(f, "AccountsOpen(until={until})"),
            ContractState::AwaitValuation { settle_at } => {
                write!(f, "AwaitValuation(settle_at={settle_at})")
            }
            ContractState::Settled { cycle } => write!(f, "Settled({cycle})"),
            ContractState::Terminated { cause, at } => write!(f, "Terminated({cause}@{at})"),
            ContractState::Error { detail } => write!(f, "Error({detail})"),
            other => f.write_str(other.name()),
        }
    }
}

/// The complete transition graph. Anything not listed here is unreachable.
pub fn is_allowed_transition(from: &ContractState, to: &ContractState) -> bool {
    use ContractState::*;
    use TerminationCause::*;
    matches!(
        (from, to),
        (PreCheck, AccountsOpen { .. })
            | (AccountsOpen { .. }, MarginCheck)
            | (MarginCheck, AwaitValuation { .. })
            | (MarginCheck, Terminated { cause: InsufficientPrefund, .. })
            | (AwaitValuation { .. }, MarginCalculation)
            | (AwaitValuation { .. }, Error { .. })
            | (MarginCalculation, Settled { .. })
            | (MarginCalculation, Terminated { cause: SettlementFailed | Matured, .. })
            | (Settled { .. }, AccountsOpen { .. })
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::A => "A",
            Party::B => "B",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid contract spec field `{field}`: {reason}")]
pub struct SpecError {
    pub field: &'static str,
    pub reason: String,
}

/// Deterministic contract terms. Party A receives the product value: a
/// positive settlement amount is paid by B to A.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractSpec {
    pub id: ContractId,
    pub party_a: AccountId,
    pub party_b: AccountId,
    pub product: ProductSpec,
    /// Trade date `t_0`; the first accounts window opens here.
    pub start: Tick,
    /// Settlement grid `t_1 < ... < t_n`; `t_n` is maturity.
    pub settlement_times: Vec<Tick>,
    pub margin_a: Amount,
    pub margin_b: Amount,
    pub fee_a: Amount,
    pub fee_b: Amount,
    pub prefund_window: Tick,
    pub oracle: OracleBinding,
    /// Failed valuation attempts tolerated before the contract suspends.
    pub valuation_retries: u32,
}

impl ContractSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        let err = |field, reason: &str| {
            Err(SpecError {
                field,
                reason: reason.to_string(),
            })
        };
        if self.party_a == self.party_b {
            return err("party_b", "parties must differ");
        }
        if self.margin_a.is_zero() {
            return err("margin_buffer_a", "must be positive");
        }
        if self.margin_b.is_zero() {
            return err("margin_buffer_b", "must be positive");
        }
        if self.fee_a.is_zero() {
            return err("termination_fee_a", "must be positive");
        }
        if self.fee_b.is_zero() {
            return err("termination_fee_b", "must be positive");
        }
        if self.settlement_times.is_empty() {
            return err("settlements", "at least one settlement time required");
        }
        if self.prefund_window == 0 {
            return err("prefund_window", "must be at least one tick");
        }
        let mut prev = self.start;
        for &t in &self.settlement_times {
            if t <= prev {
                return err("settlement_times", "grid must be strictly increasing after start");
            }
            if self.prefund_window >= t - prev {
                return err("prefund_window", "must be shorter than every settlement gap");
            }
            prev = t;
        }
        if !(self.oracle.tick_years.is_finite() && self.oracle.tick_years > 0.0) {
            return err("tick_years", "must be positive");
        }
        let scale = self.oracle.scale();
        if let Err(e) = self.product.validate(scale.years(self.start)) {
            return err("product", &e.to_string());
        }
        if self.product.maturity() + 1e-12 < scale.years(self.maturity()) {
            return err("product", "product matures before the last settlement time");
        }
        Ok(())
    }

    pub fn maturity(&self) -> Tick {
        *self.settlement_times.last().expect("validated grid")
    }

    pub fn cycles(&self) -> usize {
        self.settlement_times.len()
    }

    pub fn party(&self, side: Party) -> &AccountId {
        match side {
            Party::A => &self.party_a,
            Party::B => &self.party_b,
        }
    }

    pub fn side_of(&self, id: &AccountId) -> Option<Party> {
        if id == &self.party_a {
            Some(Party::A)
        } else if id == &self.party_b {
            Some(Party::B)
        } else {
            None
        }
    }

    pub fn margin_requirement(&self, side: Party) -> Amount {
        match side {
            Party::A => self.margin_a,
            Party::B => self.margin_b,
        }
    }

    pub fn termination_fee(&self, side: Party) -> Amount {
        match side {
            Party::A => self.fee_a,
            Party::B => self.fee_b,
        }
    }

    /// Start tick of settlement period `cycle` (0-based).
    pub fn period_start(&self, cycle: usize) -> Tick {
        if cycle == 0 {
            self.start
        } else {
            self.settlement_times[cycle - 1]
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{op} not allowed in state {state}")]
    WrongState { op: &'static str, state: String },
    #[error("margin accounts are closed")]
    AccountsNotOpen,
    #[error("{0} is not a party to this contract")]
    NotAParty(AccountId),
    #[error("too early: now={now}, allowed from {due}")]
    TooEarly { now: Tick, due: Tick },
    #[error("settlement must run at grid time {expected}, now={now}")]
    NotGridTime { now: Tick, expected: Tick },
    #[error("no valuation recorded for the current period")]
    NoValuation,
    #[error("precondition failed for {party}: needs {needed}, has {available}")]
    PreconditionFailed {
        party: AccountId,
        needed: Amount,
        available: Amount,
    },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Passed,
    Terminated { deficient: Vec<Party> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SettleOutcome {
    /// Full settlement; the next accounts window is due.
    Continued { cycle: usize, transferred: Amount },
    Matured { transferred: Amount },
    /// Partial settlement: the payer's whole buffer plus its fee moved.
    Failed {
        payer: Party,
        transferred: Amount,
        fee: Amount,
    },
}

/// A live contract instance bound to one ledger.
#[derive(Clone, Debug)]
pub struct SmartDerivative {
    spec: ContractSpec,
    state: ContractState,
    cycle: usize,
    pending: Option<SettlementAmount>,
    valuation_failures: u32,
}

impl SmartDerivative {
    /// Registers the contract and leaves it in `PreCheck`, where fees can
    /// be posted before [`SmartDerivative::activate`].
    pub fn propose(spec: ContractSpec, ledger: &mut Ledger) -> Result<Self, ContractError> {
        spec.validate()?;
        for id in [&spec.party_a, &spec.party_b] {
            ledger.balance_of(id)?;
        }
        ledger.register_contract(&spec.id)?;
        Ok(Self {
            spec,
            state: ContractState::PreCheck,
            cycle: 0,
            pending: None,
            valuation_failures: 0,
        })
    }

    /// `propose` followed by `activate`. Nothing is registered or moved
    /// unless both parties pass the precondition check.
    pub fn initialize(spec: ContractSpec, ledger: &mut Ledger, now: Tick) -> Result<Self, ContractError> {
        spec.validate()?;
        let probe = Self {
            spec,
            state: ContractState::PreCheck,
            cycle: 0,
            pending: None,
            valuation_failures: 0,
        };
        for side in [Party::A, Party::B] {
            probe.precheck(ledger, side)?;
        }
        let mut c = Self::propose(probe.spec, ledger)?;
        c.activate(ledger, now)?;
        Ok(c)
    }

    pub fn spec(&self) -> &ContractSpec {
        &self.spec
    }

    pub fn id(&self) -> &ContractId {
        &self.spec.id
    }

    pub fn state(&self) -> &ContractState {
        &self.state
    }

    /// Index of the settlement period currently in progress.
    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn period_start(&self) -> Tick {
        self.spec.period_start(self.cycle)
    }

    pub fn pending_valuation(&self) -> Option<SettlementAmount> {
        self.pending
    }

    pub fn valuation_failures(&self) -> u32 {
        self.valuation_failures
    }

    pub fn bucket(&self, ledger: &Ledger, side: Party, bucket: Bucket) -> Amount {
        ledger.segregated(&self.spec.id, self.spec.party(side), bucket)
    }

    fn wrong_state(&self, op: &'static str) -> ContractError {
        ContractError::WrongState {
            op,
            state: self.state.to_string(),
        }
    }

    fn side(&self, id: &AccountId) -> Result<Party, ContractError> {
        self.spec
            .side_of(id)
            .ok_or_else(|| ContractError::NotAParty(id.clone()))
    }

    fn move_to(&mut self, ledger: &mut Ledger, next: ContractState, trigger: Trigger) {
        debug_assert!(
            is_allowed_transition(&self.state, &next),
            "illegal transition {} -> {}",
            self.state,
            next
        );
        let mut rec = EventRecord::new(ledger.now(), EventKind::StateTransition, self.spec.id.as_str())
            .with("contract", &self.spec.id)
            .with("from", &self.state)
            .with("to", &next)
            .with("event", trigger);
        if let ContractState::Terminated { cause, .. } = &next {
            rec = rec.with("cause", cause);
        }
        ledger.record(rec);
        self.state = next;
    }

    fn precheck(&self, ledger: &Ledger, side: Party) -> Result<(), ContractError> {
        let id = self.spec.party(side);
        let posted = ledger.segregated(&self.spec.id, id, Bucket::Fee);
        let needed = self.spec.termination_fee(side).saturating_sub(posted)
            + self.spec.margin_requirement(side);
        let available = ledger.balance_of(id)?;
        if available < needed {
            return Err(ContractError::PreconditionFailed {
                party: id.clone(),
                needed,
                available,
            });
        }
        Ok(())
    }

    /// Posts (part of) a termination fee ahead of activation.
    pub fn deposit_fee(&mut self, ledger: &mut Ledger, party: &AccountId, amount: Amount) -> Result<(), ContractError> {
        self.side(party)?;
        if self.state != ContractState::PreCheck {
            return Err(self.wrong_state("depositFee"));
        }
        ledger.lock_segregated(&self.spec.id, party, Bucket::Fee, amount)?;
        Ok(())
    }

    /// Withdraws a posted-back fee once the contract has matured.
    pub fn withdraw_fee(&mut self, ledger: &mut Ledger, party: &AccountId, amount: Amount) -> Result<(), ContractError> {
        self.side(party)?;
        if !matches!(
            self.state,
            ContractState::Terminated {
                cause: TerminationCause::Matured,
                ..
            }
        ) {
            return Err(self.wrong_state("withdrawFee"));
        }
        ledger.withdraw_segregated(&self.spec.id, party, Bucket::Fee, amount)?;
        Ok(())
    }

    /// Checks both parties can cover fee plus first buffer, locks the fee
    /// and opens the first accounts window.
    pub fn activate(&mut self, ledger: &mut Ledger, now: Tick) -> Result<(), ContractError> {
        if self.state != ContractState::PreCheck {
            return Err(self.wrong_state("initialize"));
        }
        for side in [Party::A, Party::B] {
            self.precheck(ledger, side)?;
        }
        for side in [Party::A, Party::B] {
            let id = self.spec.party(side).clone();
            let posted = ledger.segregated(&self.spec.id, &id, Bucket::Fee);
            let top_up = self.spec.termination_fee(side).saturating_sub(posted);
            if !top_up.is_zero() {
                ledger.lock_segregated(&self.spec.id, &id, Bucket::Fee, top_up)?;
            }
        }
        let until = now + self.spec.prefund_window;
        self.move_to(ledger, ContractState::AccountsOpen { until }, Trigger::OpenAccounts);
        Ok(())
    }

    pub fn deposit_margin(&mut self, ledger: &mut Ledger, party: &AccountId, amount: Amount) -> Result<(), ContractError> {
        self.side(party)?;
        if !self.state.is_open() {
            return Err(ContractError::AccountsNotOpen);
        }
        ledger.lock_segregated(&self.spec.id, party, Bucket::Margin, amount)?;
        Ok(())
    }

    pub fn withdraw_margin(&mut self, ledger: &mut Ledger, party: &AccountId, amount: Amount) -> Result<(), ContractError> {
        self.side(party)?;
        if !self.state.is_open() {
            return Err(ContractError::AccountsNotOpen);
        }
        ledger.withdraw_segregated(&self.spec.id, party, Bucket::Margin, amount)?;
        Ok(())
    }

    /// Reopens the wallets after a completed settlement.
    pub fn open_accounts(&mut self, ledger: &mut Ledger, now: Tick) -> Result<(), ContractError> {
        if !matches!(self.state, ContractState::Settled { .. }) {
            return Err(self.wrong_state("openAccounts"));
        }
        let until = now + self.spec.prefund_window;
        self.move_to(ledger, ContractState::AccountsOpen { until }, Trigger::OpenAccounts);
        Ok(())
    }

    pub fn close_accounts(&mut self, ledger: &mut Ledger, now: Tick) -> Result<(), ContractError> {
        let ContractState::AccountsOpen { until } = self.state else {
            return Err(self.wrong_state("closeAccounts"));
        };
        if now < until {
            return Err(ContractError::TooEarly { now, due: until });
        }
        self.move_to(ledger, ContractState::MarginCheck, Trigger::CloseAccounts);
        Ok(())
    }

    pub fn margin_check(&mut self, ledger: &mut Ledger) -> Result<CheckOutcome, ContractError> {
        if self.state != ContractState::MarginCheck {
            return Err(self.wrong_state("marginCheck"));
        }
        let deficient: Vec<Party> = [Party::A, Party::B]
            .into_iter()
            .filter(|&s| self.bucket(ledger, s, Bucket::Margin) < self.spec.margin_requirement(s))
            .collect();
        if deficient.is_empty() {
            let settle_at = self.spec.settlement_times[self.cycle];
            self.move_to(ledger, ContractState::AwaitValuation { settle_at }, Trigger::MarginCheck);
            return Ok(CheckOutcome::Passed);
        }
        for &side in &deficient {
            let fee = self.bucket(ledger, side, Bucket::Fee);
            let (from, to) = (self.spec.party(side).clone(), self.spec.party(side.other()).clone());
            ledger.release_segregated(&self.spec.id, &from, Bucket::Fee, fee, &to)?;
        }
        self.release_all(ledger)?;
        self.journal_termination(ledger, TerminationCause::InsufficientPrefund, &deficient);
        let at = ledger.now();
        self.move_to(
            ledger,
            ContractState::Terminated {
                cause: TerminationCause::InsufficientPrefund,
                at,
            },
            Trigger::MarginCheck,
        );
        Ok(CheckOutcome::Terminated { deficient })
    }

    /// Accepts the oracle's amount for the current period.
    pub fn record_valuation(&mut self, ledger: &mut Ledger, now: Tick, amount: SettlementAmount) -> Result<(), ContractError> {
        let ContractState::AwaitValuation { settle_at } = self.state else {
            return Err(self.wrong_state("valuation"));
        };
        if now < settle_at {
            return Err(ContractError::TooEarly { now, due: settle_at });
        }
        if amount.as_of != settle_at {
            return Err(ContractError::NotGridTime {
                now: amount.as_of,
                expected: settle_at,
            });
        }
        self.pending = Some(amount);
        self.move_to(ledger, ContractState::MarginCalculation, Trigger::Valuation);
        Ok(())
    }

    /// Counts a failed oracle query. Past the retry budget the contract
    /// suspends in `Error`; returns whether that happened.
    pub fn valuation_failed(&mut self, ledger: &mut Ledger, detail: &str) -> Result<bool, ContractError> {
        if !matches!(self.state, ContractState::AwaitValuation { .. }) {
            return Err(self.wrong_state("valuation"));
        }
        self.valuation_failures += 1;
        if self.valuation_failures > self.spec.valuation_retries {
            self.move_to(
                ledger,
                ContractState::Error {
                    detail: detail.to_string(),
                },
                Trigger::Valuation,
            );
            return Ok(true);
        }
        Ok(false)
    }

    pub fn settle(&mut self, ledger: &mut Ledger, now: Tick) -> Result<SettleOutcome, ContractError> {
        if self.state != ContractState::MarginCalculation {
            return Err(self.wrong_state("settle"));
        }
        let amount = self.pending.ok_or(ContractError::NoValuation)?;
        let expected = self.spec.settlement_times[self.cycle];
        if now != expected {
            return Err(ContractError::NotGridTime { now, expected });
        }
        let signed = amount.to_minor();
        let owed = Amount(signed.unsigned_abs());
        let payer = if signed >= 0 { Party::B } else { Party::A };
        let receiver = payer.other();
        let payer_id = self.spec.party(payer).clone();
        let receiver_id = self.spec.party(receiver).clone();
        let available = self.bucket(ledger, payer, Bucket::Margin);
        let settle_rec = |transferred: Amount, full: bool| {
            EventRecord::new(now, EventKind::Settlement, self.spec.id.as_str())
                .with("contract", &self.spec.id)
                .with("cycle", self.cycle)
                .with("settlement_minor", signed)
                .with("payer", &payer_id)
                .with("receiver", &receiver_id)
                .with("transferred", transferred)
                .with("full", full)
        };

        if available >= owed {
            if !owed.is_zero() {
                ledger.release_segregated(&self.spec.id, &payer_id, Bucket::Margin, owed, &receiver_id)?;
            }
            ledger.record(settle_rec(owed, true));
            self.pending = None;
            let last = self.cycle + 1 == self.spec.cycles();
            if last {
                for side in [Party::A, Party::B] {
                    self.release_bucket(ledger, side, Bucket::Margin)?;
                }
                self.move_to(
                    ledger,
                    ContractState::Terminated {
                        cause: TerminationCause::Matured,
                        at: now,
                    },
                    Trigger::Settlement,
                );
                return Ok(SettleOutcome::Matured { transferred: owed });
            }
            self.cycle += 1;
            let cycle = self.cycle;
            self.move_to(ledger, ContractState::Settled { cycle }, Trigger::Settlement);
            return Ok(SettleOutcome::Continued {
                cycle,
                transferred: owed,
            });
        }

        // Partial settlement: the whole buffer, then the fee.
        if !available.is_zero() {
            ledger.release_segregated(&self.spec.id, &payer_id, Bucket::Margin, available, &receiver_id)?;
        }
        ledger.record(settle_rec(available, false));
        let fee = self.bucket(ledger, payer, Bucket::Fee);
        ledger.release_segregated(&self.spec.id, &payer_id, Bucket::Fee, fee, &receiver_id)?;
        self.release_all(ledger)?;
        self.pending = None;
        self.journal_termination(ledger, TerminationCause::SettlementFailed, &[payer]);
        self.move_to(
            ledger,
            ContractState::Terminated {
                cause: TerminationCause::SettlementFailed,
                at: now,
            },
            Trigger::Settlement,
        );
        Ok(SettleOutcome::Failed {
            payer,
            transferred: available,
            fee,
        })
    }

    /// Posts both termination fees back to their owners after maturity.
    pub fn post_back_fees(&mut self, ledger: &mut Ledger) -> Result<(), ContractError> {
        let matured = matches!(
            self.state,
            ContractState::Terminated {
                cause: TerminationCause::Matured,
                ..
            }
        );
        let outstanding = [Party::A, Party::B]
            .iter()
            .any(|&s| !self.bucket(ledger, s, Bucket::Fee).is_zero());
        if !matured || !outstanding {
            return Err(self.wrong_state("maturity"));
        }
        for side in [Party::A, Party::B] {
            let fee = self.bucket(ledger, side, Bucket::Fee);
            let id = self.spec.party(side).clone();
            self.withdraw_fee(ledger, &id, fee)?;
        }
        self.journal_termination(ledger, TerminationCause::Matured, &[]);
        Ok(())
    }

    fn release_bucket(&self, ledger: &mut Ledger, side: Party, bucket: Bucket) -> Result<(), ContractError> {
        let amt = self.bucket(ledger, side, bucket);
        if !amt.is_zero() {
            let id = self.spec.party(side);
            ledger.release_segregated(&self.spec.id, id, bucket, amt, id)?;
        }
        Ok(())
    }

    fn release_all(&self, ledger: &mut Ledger) -> Result<(), ContractError> {
        for side in [Party::A, Party::B] {
            self.release_bucket(ledger, side, Bucket::Margin)?;
            self.release_bucket(ledger, side, Bucket::Fee)?;
        }
        Ok(())
    }

    fn journal_termination(&self, ledger: &mut Ledger, cause: TerminationCause, causing: &[Party]) {
        let causing: Vec<&str> = causing.iter().map(|&s| self.spec.party(s).as_str()).collect();
        let mut rec = EventRecord::new(ledger.now(), EventKind::Termination, self.spec.id.as_str())
            .with("contract", &self.spec.id)
            .with("cause", cause)
            .with("causing", causing.join(";"));
        if cause == TerminationCause::Matured {
            rec = rec.with("event", Trigger::Maturity);
        }
        ledger.record(rec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::FLAT_CURVE_V1;

    struct Fixture {
        ledger: Ledger,
        a: AccountId,
        b: AccountId,
        spec: ContractSpec,
    }

    const M: u64 = 400;
    const P: u64 = 100;

    fn fixture(fund_a: u64, fund_b: u64) -> Fixture {
        let mut ledger = Ledger::new("cb").unwrap();
        let issuer = ledger.issuer().clone();
        let a = ledger.open_account("bank1").unwrap();
        let b = ledger.open_account("bank2").unwrap();
        ledger.mint(&issuer, &a, Amount(fund_a)).unwrap();
        ledger.mint(&issuer, &b, Amount(fund_b)).unwrap();
        let spec = ContractSpec {
            id: ContractId::new("sdc-1"),
            party_a: a.clone(),
            party_b: b.clone(),
            product: ProductSpec::Forward {
                notional: 1.0,
                strike: 100.0,
                maturity: 1.0,
            },
            start: 0,
            settlement_times: vec![10, 20, 30],
            margin_a: Amount(M),
            margin_b: Amount(M),
            fee_a: Amount(P),
            fee_b: Amount(P),
            prefund_window: 3,
            oracle: OracleBinding {
                pricer_version: FLAT_CURVE_V1.into(),
                tick_years: 1.0 / 30.0,
            },
            valuation_retries: 1,
        };
        Fixture { ledger, a, b, spec }
    }

    fn funded_open(fx: &mut Fixture) -> SmartDerivative {
        let mut c = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
        c.deposit_margin(&mut fx.ledger, &fx.a, Amount(M)).unwrap();
        c.deposit_margin(&mut fx.ledger, &fx.b, Amount(M)).unwrap();
        c
    }

    fn to_calculation(fx: &mut Fixture, c: &mut SmartDerivative, f: f64) {
        let start = c.period_start();
        let due = fx.spec.settlement_times[c.cycle()];
        fx.ledger.set_time(start + 3);
        c.close_accounts(&mut fx.ledger, start + 3).unwrap();
        assert_eq!(c.margin_check(&mut fx.ledger).unwrap(), CheckOutcome::Passed);
        fx.ledger.set_time(due);
        c.record_valuation(&mut fx.ledger, due, SettlementAmount { value: f, as_of: due })
            .unwrap();
    }

    #[test]
    fn initialize_exact_funding() {
        let mut fx = fixture(M + P, M + P);
        let c = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
        assert_eq!(c.state(), &ContractState::AccountsOpen { until: 3 });
        assert_eq!(c.bucket(&fx.ledger, Party::A, Bucket::Fee), Amount(P));
        assert_eq!(c.bucket(&fx.ledger, Party::B, Bucket::Fee), Amount(P));
    }

    #[test]
    fn initialize_short_party_changes_nothing() {
        let mut fx = fixture(M + P, M + P - 1);
        let before = fx.ledger.journal().head_hex();
        let err = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap_err();
        assert!(matches!(err, ContractError::PreconditionFailed { ref party, .. } if party == &fx.b));
        assert_eq!(fx.ledger.journal().head_hex(), before);
        assert_eq!(fx.ledger.balance_of(&fx.a).unwrap(), Amount(M + P));
        // The id was not consumed by the failed attempt.
        fx.ledger.mint(&fx.ledger.issuer().clone(), &fx.b, Amount(1)).unwrap();
        SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
    }

    #[test]
    fn duplicate_initialize_rejected() {
        let mut fx = fixture(10 * (M + P), 10 * (M + P));
        SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
        let n = fx.ledger.journal().len();
        let err = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap_err();
        assert!(matches!(err, ContractError::Ledger(LedgerError::DuplicateContract(_))));
        assert_eq!(fx.ledger.journal().len(), n);
    }

    #[test]
    fn fee_deposit_and_withdraw_timing() {
        let mut fx = fixture(M + P, M + P);
        let mut c = SmartDerivative::propose(fx.spec.clone(), &mut fx.ledger).unwrap();
        c.deposit_fee(&mut fx.ledger, &fx.a, Amount(60)).unwrap();
        c.activate(&mut fx.ledger, 0).unwrap();
        assert_eq!(c.bucket(&fx.ledger, Party::A, Bucket::Fee), Amount(P));
        assert_eq!(fx.ledger.balance_of(&fx.a).unwrap(), Amount(M));
        assert!(matches!(
            c.deposit_fee(&mut fx.ledger, &fx.a, Amount(1)),
            Err(ContractError::WrongState { .. })
        ));
        assert!(matches!(
            c.withdraw_fee(&mut fx.ledger, &fx.a, Amount(1)),
            Err(ContractError::WrongState { .. })
        ));
    }

    #[test]
    fn window_rules() {
        let mut fx = fixture(2 * (M + P), 2 * (M + P));
        let mut c = funded_open(&mut fx);
        assert_eq!(c.bucket(&fx.ledger, Party::A, Bucket::Margin), Amount(M));
        let stranger = fx.ledger.open_account("bank3").unwrap();
        assert_eq!(
            c.deposit_margin(&mut fx.ledger, &stranger, Amount(1)),
            Err(ContractError::NotAParty(stranger))
        );
        assert!(matches!(
            c.withdraw_margin(&mut fx.ledger, &fx.a, Amount(M + 1)),
            Err(ContractError::Ledger(LedgerError::InsufficientSegregated { .. }))
        ));
        assert_eq!(
            c.close_accounts(&mut fx.ledger, 2),
            Err(ContractError::TooEarly { now: 2, due: 3 })
        );
        c.close_accounts(&mut fx.ledger, 3).unwrap();
        assert_eq!(c.state(), &ContractState::MarginCheck);
        assert!(matches!(
            c.close_accounts(&mut fx.ledger, 3),
            Err(ContractError::WrongState { .. })
        ));
        assert_eq!(
            c.deposit_margin(&mut fx.ledger, &fx.a, Amount(1)),
            Err(ContractError::AccountsNotOpen)
        );
        assert_eq!(
            c.withdraw_margin(&mut fx.ledger, &fx.a, Amount(1)),
            Err(ContractError::AccountsNotOpen)
        );
    }

    #[test]
    fn margin_check_boundary_passes() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        c.close_accounts(&mut fx.ledger, 3).unwrap();
        assert_eq!(c.margin_check(&mut fx.ledger).unwrap(), CheckOutcome::Passed);
        assert_eq!(c.state(), &ContractState::AwaitValuation { settle_at: 10 });
    }

    #[test]
    fn one_sided_prefund_failure_moves_fee() {
        let mut fx = fixture(M + P, M + P);
        let mut c = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
        c.deposit_margin(&mut fx.ledger, &fx.a, Amount(M - 1)).unwrap();
        c.deposit_margin(&mut fx.ledger, &fx.b, Amount(M)).unwrap();
        c.close_accounts(&mut fx.ledger, 3).unwrap();
        let out = c.margin_check(&mut fx.ledger).unwrap();
        assert_eq!(out, CheckOutcome::Terminated { deficient: vec![Party::A] });
        assert_eq!(c.state().termination().unwrap().0, TerminationCause::InsufficientPrefund);
        assert_eq!(fx.ledger.wealth_of(&fx.a), Amount(M));
        assert_eq!(fx.ledger.wealth_of(&fx.b), Amount(M + 2 * P));
        assert_eq!(fx.ledger.balance_of(&fx.b).unwrap(), Amount(M + 2 * P));
    }

    #[test]
    fn both_deficient_fees_cross() {
        let mut fx = fixture(M + P, M + P);
        let mut c = SmartDerivative::initialize(fx.spec.clone(), &mut fx.ledger, 0).unwrap();
        c.close_accounts(&mut fx.ledger, 3).unwrap();
        let out = c.margin_check(&mut fx.ledger).unwrap();
        assert_eq!(out, CheckOutcome::Terminated { deficient: vec![Party::A, Party::B] });
        assert_eq!(fx.ledger.wealth_of(&fx.a), Amount(M + P));
        assert_eq!(fx.ledger.wealth_of(&fx.b), Amount(M + P));
    }

    #[test]
    fn zero_settlement_advances_cycle() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        to_calculation(&mut fx, &mut c, 0.3);
        let out = c.settle(&mut fx.ledger, 10).unwrap();
        assert_eq!(out, SettleOutcome::Continued { cycle: 1, transferred: Amount(0) });
        assert_eq!(c.state(), &ContractState::Settled { cycle: 1 });
        c.open_accounts(&mut fx.ledger, 10).unwrap();
        assert_eq!(c.state(), &ContractState::AccountsOpen { until: 13 });
    }

    #[test]
    fn settlement_equal_to_buffer_continues() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        to_calculation(&mut fx, &mut c, M as f64);
        let out = c.settle(&mut fx.ledger, 10).unwrap();
        assert_eq!(out, SettleOutcome::Continued { cycle: 1, transferred: Amount(M) });
        assert_eq!(fx.ledger.balance_of(&fx.a).unwrap(), Amount(M));
        assert_eq!(c.bucket(&fx.ledger, Party::B, Bucket::Margin), Amount(0));
    }

    #[test]
    fn settlement_beyond_buffer_fails_with_fee() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        to_calculation(&mut fx, &mut c, -500.0);
        let out = c.settle(&mut fx.ledger, 10).unwrap();
        assert_eq!(
            out,
            SettleOutcome::Failed { payer: Party::A, transferred: Amount(M), fee: Amount(P) }
        );
        // B receives 400 + P and gets its own buffer and fee back.
        assert_eq!(fx.ledger.balance_of(&fx.b).unwrap(), Amount(M + P + M + P));
        assert_eq!(fx.ledger.wealth_of(&fx.a), Amount(0));
        assert_eq!(c.state().termination().unwrap().0, TerminationCause::SettlementFailed);
    }

    #[test]
    fn settle_requires_grid_time_and_state() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        assert!(matches!(c.settle(&mut fx.ledger, 10), Err(ContractError::WrongState { .. })));
        to_calculation(&mut fx, &mut c, 1.0);
        assert_eq!(
            c.settle(&mut fx.ledger, 11),
            Err(ContractError::NotGridTime { now: 11, expected: 10 })
        );
    }

    #[test]
    fn maturity_returns_margins_then_fees() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        for (i, &t) in [10u64, 20, 30].iter().enumerate() {
            to_calculation(&mut fx, &mut c, 0.0);
            let out = c.settle(&mut fx.ledger, t).unwrap();
            if i < 2 {
                c.open_accounts(&mut fx.ledger, t).unwrap();
            } else {
                assert_eq!(out, SettleOutcome::Matured { transferred: Amount(0) });
            }
        }
        assert_eq!(c.state(), &ContractState::Terminated { cause: TerminationCause::Matured, at: 30 });
        assert_eq!(fx.ledger.balance_of(&fx.a).unwrap(), Amount(M));
        c.withdraw_fee(&mut fx.ledger, &fx.a, Amount(P)).unwrap();
        assert_eq!(fx.ledger.balance_of(&fx.a).unwrap(), Amount(M + P));
        c.post_back_fees(&mut fx.ledger).unwrap();
        assert_eq!(fx.ledger.balance_of(&fx.b).unwrap(), Amount(M + P));
        assert!(matches!(c.post_back_fees(&mut fx.ledger), Err(ContractError::WrongState { .. })));
    }

    #[test]
    fn valuation_retries_then_error() {
        let mut fx = fixture(M + P, M + P);
        let mut c = funded_open(&mut fx);
        c.close_accounts(&mut fx.ledger, 3).unwrap();
        c.margin_check(&mut fx.ledger).unwrap();
        assert!(!c.valuation_failed(&mut fx.ledger, "missing").unwrap());
        assert!(c.valuation_failed(&mut fx.ledger, "missing").unwrap());
        assert!(matches!(c.state(), ContractState::Error { .. }));
        assert!(c.state().is_absorbing());
    }

    #[test]
    fn spec_validation() {
        let fx = fixture(0, 0);
        let mut s = fx.spec.clone();
        s.fee_a = Amount(0);
        assert_eq!(s.validate().unwrap_err().field, "termination_fee_a");
        let mut s = fx.spec.clone();
        s.prefund_window = 10;
        assert_eq!(s.validate().unwrap_err().field, "prefund_window");
        let mut s = fx.spec.clone();
        s.settlement_times = vec![10, 10];
        assert_eq!(s.validate().unwrap_err().field, "settlement_times");
        let mut s = fx.spec;
        s.product = ProductSpec::Forward { notional: 1.0, strike: 1.0, maturity: 0.5 };
        assert_eq!(s.validate().unwrap_err().field, "product");
    }

    #[test]
    fn transition_table() {
        use ContractState::*;
        assert!(is_allowed_transition(&PreCheck, &AccountsOpen { until: 1 }));
        assert!(!is_allowed_transition(&PreCheck, &MarginCheck));
        assert!(!is_allowed_transition(
            &MarginCheck,
            &Terminated { cause: TerminationCause::Matured, at: 0 }
        ));
        assert!(!is_allowed_transition(
            &Terminated { cause: TerminationCause::Matured, at: 0 },
            &AccountsOpen { until: 1 }
        ));
    }
}
