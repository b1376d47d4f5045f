//! Time grid and the three ways of triggering lifecycle events.
//!
//! * active: the engine fires every timeline event at its tick;
//! * passive: parties request the next due event and the engine checks
//!   admissibility first;
//! * driver: a script is replayed verbatim and the state machine decides
//!   what is legal.
//!
//! All three funnel into [`Engine::fire`], so a compliant run produces the
//! same journal whichever mode triggered it.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::contract::{
    CheckOutcome, ContractError, ContractState, SettleOutcome, SmartDerivative, TerminationCause,
};
use crate::journal::{EventKind, EventRecord, Journal, SYSTEM_ACTOR};
use crate::ledger::{AccountId, Ledger};
use crate::valuation::{MarginOracle, SettlementAmount, ValuationError};
use crate::ContractSpec;
use crate::Tick;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trigger {
    OpenAccounts,
    CloseAccounts,
    MarginCheck,
    Valuation,
    Settlement,
    Maturity,
}

impl Trigger {
    pub const ALL: [Trigger; 6] = [
        Trigger::OpenAccounts,
        Trigger::CloseAccounts,
        Trigger::MarginCheck,
        Trigger::Valuation,
        Trigger::Settlement,
        Trigger::Maturity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::OpenAccounts => "OPEN_ACCOUNTS",
            Trigger::CloseAccounts => "CLOSE_ACCOUNTS",
            Trigger::MarginCheck => "MARGIN_CHECK",
            Trigger::Valuation => "VALUATION",
            Trigger::Settlement => "SETTLEMENT",
            Trigger::Maturity => "MATURITY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimelineEvent {
    pub tick: Tick,
    pub kind: Trigger,
    pub cycle: usize,
}

/// Ordered lifecycle events. Within a tick, events keep construction order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Timeline {
    events: Vec<TimelineEvent>,
    cycles: usize,
}

impl Timeline {
    pub fn events(&self) -> &[TimelineEvent] {
        &self.events
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn cycle_events(&self, cycle: usize) -> impl Iterator<Item = &TimelineEvent> {
        self.events.iter().filter(move |e| e.cycle == cycle)
    }
}

/// One cycle per settlement interval: open at the period start, close after
/// the prefunding window, check margins one tick later, then value and
/// settle at the period end. The last cycle also carries MATURITY.
pub fn build_timeline(spec: &ContractSpec) -> Timeline {
    let mut events = Vec::with_capacity(spec.cycles() * 5 + 1);
    for (cycle, &end) in spec.settlement_times.iter().enumerate() {
        let start = spec.period_start(cycle);
        let close = start + spec.prefund_window;
        let mut push = |tick, kind| events.push(TimelineEvent { tick, kind, cycle });
        push(start, Trigger::OpenAccounts);
        push(close, Trigger::CloseAccounts);
        push(close + 1, Trigger::MarginCheck);
        push(end, Trigger::Valuation);
        push(end, Trigger::Settlement);
        if cycle + 1 == spec.cycles() {
            push(end, Trigger::Maturity);
        }
    }
    Timeline {
        events,
        cycles: spec.cycles(),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error("event at tick {requested} would move the clock back from {clock}")]
    TimeTravel { requested: Tick, clock: Tick },
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Opened,
    Closed,
    Checked(CheckOutcome),
    Valued(SettlementAmount),
    /// Market data missing; `suspended` once retries are exhausted.
    ValuationUnavailable { suspended: bool },
    Settled(SettleOutcome),
    FeesPostedBack,
}

/// What the parties are allowed to do while the wallets are open.
pub struct OpenWindow<'a> {
    pub ledger: &'a mut Ledger,
    pub contract: &'a mut SmartDerivative,
    pub oracle: &'a MarginOracle,
    pub now: Tick,
}

/// Counterparty behaviour invoked right after each OPEN_ACCOUNTS event.
pub trait WindowPolicy {
    fn on_open(&mut self, window: &mut OpenWindow<'_>);
}

/// Does nothing during open windows.
pub struct Idle;

impl WindowPolicy for Idle {
    fn on_open(&mut self, _window: &mut OpenWindow<'_>) {}
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    NotAuthorized,
    NotDue { due: Tick },
    OutOfOrder { expected: Trigger },
    Finished,
    Failed(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NotAuthorized => f.write_str("NotAuthorized"),
            RejectReason::NotDue { due } => write!(f, "NotDue(due={due})"),
            RejectReason::OutOfOrder { expected } => write!(f, "OutOfOrder(expected={expected})"),
            RejectReason::Finished => f.write_str("Finished"),
            RejectReason::Failed(why) => write!(f, "Failed({why})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RequestOutcome {
    Accepted(StepOutcome),
    Rejected(RejectReason),
}

/// One driver-script line: `tick,event_kind,requesting_party`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptStep {
    pub tick: Tick,
    pub kind: Trigger,
    pub requester: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("driver script line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("driver script io: {0}")]
    Io(String),
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>, ScriptError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |reason: &str| ScriptError::Parse {
            line,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let [tick, kind, requester] = fields[..] else {
            return Err(err("expected `tick,event_kind,requesting_party`"));
        };
        let tick = tick.parse().map_err(|_| err("tick is not an integer"))?;
        let kind = Trigger::parse(kind).ok_or_else(|| err("unknown event kind"))?;
        if requester.is_empty() {
            return Err(err("empty requesting party"));
        }
        steps.push(ScriptStep {
            tick,
            kind,
            requester: requester.to_string(),
        });
    }
    Ok(steps)
}

pub fn read_script(path: &Path) -> Result<Vec<ScriptStep>, ScriptError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScriptError::Io(format!("{}: {e}", path.display())))?;
    parse_script(&text)
}

pub fn format_script(steps: &[ScriptStep]) -> String {
    steps
        .iter()
        .map(|s| format!("{},{},{}\n", s.tick, s.kind, s.requester))
        .collect()
}

/// Recovers the fired event sequence from an engine journal.
///
/// Each fired event leaves exactly one marker: its state transition, a
/// missing-data valuation record, or the maturity fee post-back.
pub fn script_from_journal(journal: &Journal) -> Result<Vec<ScriptStep>, crate::journal::DecodeError> {
    let mut steps = Vec::new();
    for rec in journal.records()? {
        let marker = match rec.kind {
            EventKind::StateTransition if !rec.get("to").is_some_and(|s| s.starts_with("Error")) => {
                rec.get("event")
            }
            EventKind::Valuation if rec.get("status") == Some(MISSING_STATUS) => Some("VALUATION"),
            EventKind::Termination => rec.get("event"),
            _ => None,
        };
        if let Some(kind) = marker.and_then(Trigger::parse) {
            steps.push(ScriptStep {
                tick: rec.timestamp,
                kind,
                requester: SYSTEM_ACTOR.to_string(),
            });
        }
    }
    Ok(steps)
}

const MISSING_STATUS: &str = "missing";

/// Owns one contract, its ledger and oracle, and the simulated clock.
pub struct Engine {
    ledger: Ledger,
    contract: SmartDerivative,
    oracle: MarginOracle,
    timeline: Timeline,
    next: usize,
    clock: Tick,
    oracle_account: Option<AccountId>,
    policy: Box<dyn WindowPolicy>,
}

impl Engine {
    /// Proposes the contract on `ledger`; it stays in `PreCheck` until the
    /// first OPEN_ACCOUNTS event.
    pub fn new(
        mut ledger: Ledger,
        spec: ContractSpec,
        oracle: MarginOracle,
        policy: Box<dyn WindowPolicy>,
    ) -> Result<Self, EngineError> {
        let timeline = build_timeline(&spec);
        let contract = SmartDerivative::propose(spec, &mut ledger)?;
        let clock = ledger.now();
        Ok(Self {
            ledger,
            contract,
            oracle,
            timeline,
            next: 0,
            clock,
            oracle_account: None,
            policy,
        })
    }

    /// Lets `account` request events in passive mode alongside the parties.
    pub fn with_oracle_account(mut self, account: AccountId) -> Self {
        self.oracle_account = Some(account);
        self
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn contract(&self) -> &SmartDerivative {
        &self.contract
    }

    pub fn oracle(&self) -> &MarginOracle {
        &self.oracle
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn journal(&self) -> &Journal {
        self.ledger.journal()
    }

    pub fn into_parts(self) -> (Ledger, SmartDerivative, MarginOracle) {
        (self.ledger, self.contract, self.oracle)
    }

    /// Direct wallet access for a party, subject to the contract's window
    /// rules. Used by tests and external drivers.
    pub fn deposit_margin(&mut self, party: &AccountId, amount: crate::Amount) -> Result<(), ContractError> {
        self.contract.deposit_margin(&mut self.ledger, party, amount)
    }

    pub fn withdraw_margin(&mut self, party: &AccountId, amount: crate::Amount) -> Result<(), ContractError> {
        self.contract.withdraw_margin(&mut self.ledger, party, amount)
    }

    /// Advances the clock without firing anything.
    pub fn advance_to(&mut self, now: Tick) -> Result<(), EngineError> {
        if now < self.clock {
            return Err(EngineError::TimeTravel {
                requested: now,
                clock: self.clock,
            });
        }
        self.clock = now;
        self.ledger.set_time(now);
        Ok(())
    }

    /// True once no further timeline event can have an effect.
    pub fn is_finished(&self) -> bool {
        self.next_due().is_none()
    }

    /// The event the schedule expects next, if any.
    pub fn next_due(&self) -> Option<TimelineEvent> {
        match self.contract.state() {
            ContractState::Error { .. } => None,
            ContractState::Terminated { cause, .. } if *cause != TerminationCause::Matured => None,
            _ => self.timeline.events().get(self.next).copied(),
        }
    }

    fn is_authorized(&self, requester: &str) -> bool {
        let spec = self.contract.spec();
        requester == spec.party_a.as_str()
            || requester == spec.party_b.as_str()
            || self
                .oracle_account
                .as_ref()
                .is_some_and(|o| o.as_str() == requester)
    }

    /// Executes the contract operation behind `kind` at tick `now`.
    pub fn fire(&mut self, kind: Trigger, now: Tick) -> Result<StepOutcome, EngineError> {
        self.advance_to(now)?;
        let ledger = &mut self.ledger;
        let contract = &mut self.contract;
        let outcome = match kind {
            Trigger::OpenAccounts => {
                if *contract.state() == ContractState::PreCheck {
                    contract.activate(ledger, now)?;
                } else {
                    contract.open_accounts(ledger, now)?;
                }
                let mut window = OpenWindow {
                    ledger,
                    contract,
                    oracle: &self.oracle,
                    now,
                };
                self.policy.on_open(&mut window);
                StepOutcome::Opened
            }
            Trigger::CloseAccounts => {
                contract.close_accounts(ledger, now)?;
                StepOutcome::Closed
            }
            Trigger::MarginCheck => StepOutcome::Checked(contract.margin_check(ledger)?),
            Trigger::Valuation => {
                let ContractState::AwaitValuation { settle_at } = *contract.state() else {
                    return Err(ContractError::WrongState {
                        op: "valuation",
                        state: contract.state().to_string(),
                    }
                    .into());
                };
                if now < settle_at {
                    return Err(ContractError::TooEarly { now, due: settle_at }.into());
                }
                let start = contract.period_start();
                // Market-data pre-check before asking the oracle.
                if !self.oracle.is_available(start, settle_at) {
                    let missing = if self.oracle.store().contains(start) { settle_at } else { start };
                    let rec = EventRecord::new(now, EventKind::Valuation, SYSTEM_ACTOR)
                        .with("contract", contract.id())
                        .with("period_start", start)
                        .with("period_end", settle_at)
                        .with("status", MISSING_STATUS)
                        .with("missing_tick", missing);
                    ledger.record(rec);
                    let detail = ValuationError::MissingSnapshot(missing).to_string();
                    let suspended = contract.valuation_failed(ledger, &detail)?;
                    StepOutcome::ValuationUnavailable { suspended }
                } else {
                    let spec = contract.spec();
                    let amount = self.oracle.query(
                        ledger,
                        &spec.id,
                        &spec.oracle,
                        &spec.product,
                        start,
                        settle_at,
                    )?;
                    contract.record_valuation(ledger, now, amount)?;
                    StepOutcome::Valued(amount)
                }
            }
            Trigger::Settlement => StepOutcome::Settled(contract.settle(ledger, now)?),
            Trigger::Maturity => {
                contract.post_back_fees(ledger)?;
                StepOutcome::FeesPostedBack
            }
        };
        Ok(outcome)
    }

    /// Active mode: fire every remaining timeline event at its tick.
    /// Stops at the first error, which is returned.
    pub fn run_active(&mut self) -> Result<(), EngineError> {
        while let Some(ev) = self.next_due() {
            loop {
                let out = self.fire(ev.kind, ev.tick)?;
                match out {
                    StepOutcome::ValuationUnavailable { suspended: false } => continue,
                    StepOutcome::ValuationUnavailable { suspended: true } => return Ok(()),
                    _ => break,
                }
            }
            self.next += 1;
        }
        Ok(())
    }

    /// Passive mode: `requester` asks for `kind` at `now`. The event runs
    /// at its scheduled tick iff it is the next due event, its time has
    /// come and the requester is a party or the oracle account.
    pub fn request_event(&mut self, requester: &AccountId, kind: Trigger, now: Tick) -> RequestOutcome {
        if !self.is_authorized(requester.as_str()) {
            return RequestOutcome::Rejected(RejectReason::NotAuthorized);
        }
        let Some(due) = self.next_due() else {
            return RequestOutcome::Rejected(RejectReason::Finished);
        };
        if due.kind != kind {
            return RequestOutcome::Rejected(RejectReason::OutOfOrder { expected: due.kind });
        }
        if now < due.tick {
            return RequestOutcome::Rejected(RejectReason::NotDue { due: due.tick });
        }
        match self.fire(kind, due.tick) {
            Ok(out) => {
                if !matches!(out, StepOutcome::ValuationUnavailable { suspended: false }) {
                    self.next += 1;
                }
                RequestOutcome::Accepted(out)
            }
            Err(e) => RequestOutcome::Rejected(RejectReason::Failed(e.to_string())),
        }
    }

    /// Driver mode: replays `script` step by step. Illegal steps are
    /// journaled as `Rejected` records and the replay continues.
    pub fn run_driver(&mut self, script: &[ScriptStep]) -> Vec<RequestOutcome> {
        script.iter().map(|step| self.drive(step)).collect()
    }

    fn drive(&mut self, step: &ScriptStep) -> RequestOutcome {
        let reason = if step.requester != SYSTEM_ACTOR && !self.is_authorized(&step.requester) {
            RejectReason::NotAuthorized
        } else {
            match self.fire(step.kind, step.tick) {
                Ok(out) => return RequestOutcome::Accepted(out),
                Err(e) => RejectReason::Failed(e.to_string()),
            }
        };
        let tick = step.tick.max(self.clock);
        let rec = EventRecord::new(tick, EventKind::Rejected, step.requester.as_str())
            .with("contract", self.contract.id())
            .with("event", step.kind)
            .with("requested_tick", step.tick)
            .with("reason", &reason);
        self.ledger.record(rec);
        RequestOutcome::Rejected(reason)
    }
}
