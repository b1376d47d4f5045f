//! Run reports derived from the journal.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::contract::TerminationCause;
use crate::journal::{EventKind, EventRecord, Journal};
use crate::ledger::{Bucket, MINT_SOURCE};
use crate::Tick;

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Terminated { cause: TerminationCause, at: Tick },
    /// Valuation retries exhausted.
    Suspended { at: Tick, detail: String },
    /// The contract never left pre-check.
    NotStarted { reason: String },
    /// The run stopped in a non-absorbing state.
    Incomplete { state: String },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Terminated { cause, at } => write!(f, "{cause} at tick {at}"),
            Outcome::Suspended { at, detail } => write!(f, "SUSPENDED at tick {at} ({detail})"),
            Outcome::NotStarted { reason } => write!(f, "NOT_STARTED ({reason})"),
            Outcome::Incomplete { state } => write!(f, "INCOMPLETE in {state}"),
        }
    }
}

/// One executed settlement period.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRow {
    /// 1-based.
    pub cycle: usize,
    pub period_start: Tick,
    pub period_end: Tick,
    /// Product value after the settlement market move.
    pub present_value: String,
    pub settlement: String,
    pub settlement_minor: i64,
    pub payer: String,
    pub receiver: String,
    pub transferred: u64,
    pub full: bool,
}

/// A value movement between owners, one per journal `Transfer` record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferRow {
    pub block: u64,
    pub tick: Tick,
    pub from: String,
    pub to: String,
    pub amount: u64,
    /// `FREE` for plain transfers, otherwise the source bucket.
    pub bucket: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalanceRow {
    pub party: String,
    pub initial: u64,
    pub r#final: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checks {
    /// Ledger supply equals holdings and party wealth sums are unchanged.
    pub conservation: bool,
    pub journal_verified: bool,
    /// Transfer rows explain every balance change and every settlement.
    pub reconciliation: bool,
    /// Party-initiated margin moves happened only while accounts were open.
    pub windows: bool,
    pub monotone_time: bool,
}

impl Checks {
    pub fn all_ok(&self) -> bool {
        self.conservation && self.journal_verified && self.reconciliation && self.windows && self.monotone_time
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub contract: String,
    pub mode: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub cycles: Vec<CycleRow>,
    pub transfers: Vec<TransferRow>,
    pub balances: Vec<BalanceRow>,
    pub journal_head: String,
    pub journal_len: usize,
    pub checks: Checks,
    pub journal: Journal,
}

impl RunReport {
    pub fn termination(&self) -> Option<(TerminationCause, Tick)> {
        match self.outcome {
            Outcome::Terminated { cause, at } => Some((cause, at)),
            _ => None,
        }
    }

    pub fn balance(&self, party: &str) -> Option<&BalanceRow> {
        self.balances.iter().find(|b| b.party == party)
    }

    pub fn settlement_transfers(&self) -> u64 {
        self.cycles.iter().map(|c| c.transferred).sum()
    }
}

/// Inputs the journal alone cannot provide.
pub(crate) struct ReportInputs<'a> {
    pub contract: &'a str,
    pub mode: &'a str,
    pub seed: u64,
    pub outcome: Outcome,
    /// `(party, initial wealth, final wealth)`.
    pub parties: Vec<(String, u64, u64)>,
    pub ledger_conserved: bool,
}

fn field<'r>(rec: &'r EventRecord, key: &str) -> &'r str {
    rec.get(key).unwrap_or("")
}

fn num<T: FromStr + Default>(rec: &EventRecord, key: &str) -> T {
    field(rec, key).parse().unwrap_or_default()
}

pub(crate) fn build_report(journal: Journal, inputs: ReportInputs<'_>) -> RunReport {
    let journal_verified = journal.verify();
    let records: Vec<EventRecord> = journal.records().unwrap_or_default();
    let decoded = records.len() == journal.len();

    let mut valuations: BTreeMap<(Tick, Tick), &EventRecord> = BTreeMap::new();
    let mut cycles = Vec::new();
    let mut transfers = Vec::new();
    let mut monotone_time = true;
    let mut windows = true;
    let mut open = false;
    let mut last_tick = 0;
    let parties: Vec<&str> = inputs.parties.iter().map(|(p, _, _)| p.as_str()).collect();

    for (i, rec) in records.iter().enumerate() {
        if rec.timestamp < last_tick {
            monotone_time = false;
        }
        last_tick = rec.timestamp;
        match rec.kind {
            EventKind::Valuation if rec.get("status").is_none() => {
                valuations.insert((num(rec, "period_start"), num(rec, "period_end")), rec);
            }
            EventKind::Settlement => {
                let cycle: usize = num(rec, "cycle");
                let end = rec.timestamp;
                let val = valuations
                    .iter()
                    .rev()
                    .find(|((_, e), _)| *e == end)
                    .map(|(k, v)| (*k, *v));
                cycles.push(CycleRow {
                    cycle: cycle + 1,
                    period_start: val.map_or(0, |(k, _)| k.0),
                    period_end: end,
                    present_value: val.map_or(String::new(), |(_, v)| field(v, "present_value").to_string()),
                    settlement: val.map_or(String::new(), |(_, v)| field(v, "settlement").to_string()),
                    settlement_minor: num(rec, "settlement_minor"),
                    payer: field(rec, "payer").to_string(),
                    receiver: field(rec, "receiver").to_string(),
                    transferred: num(rec, "transferred"),
                    full: field(rec, "full") == "true",
                });
            }
            EventKind::Transfer => transfers.push(TransferRow {
                block: i as u64,
                tick: rec.timestamp,
                from: field(rec, "from").to_string(),
                to: field(rec, "to").to_string(),
                amount: num(rec, "amount"),
                bucket: rec.get("bucket").unwrap_or("FREE").to_string(),
            }),
            EventKind::StateTransition => {
                open = field(rec, "to").starts_with("AccountsOpen");
            }
            EventKind::Lock | EventKind::Release => {
                let party_initiated = parties.contains(&rec.actor.as_str());
                if party_initiated && field(rec, "bucket") == Bucket::Margin.as_str() && !open {
                    windows = false;
                }
            }
            _ => {}
        }
    }

    let reconciliation = decoded && reconcile(&inputs.parties, &transfers, &cycles);
    let initial: u128 = inputs.parties.iter().map(|(_, i, _)| *i as u128).sum();
    let fin: u128 = inputs.parties.iter().map(|(_, _, f)| *f as u128).sum();
    let checks = Checks {
        conservation: inputs.ledger_conserved && initial == fin,
        journal_verified,
        reconciliation,
        windows: decoded && windows,
        monotone_time: decoded && monotone_time,
    };
    RunReport {
        contract: inputs.contract.to_string(),
        mode: inputs.mode.to_string(),
        seed: inputs.seed,
        outcome: inputs.outcome,
        cycles,
        transfers,
        balances: inputs
            .parties
            .into_iter()
            .map(|(party, initial, r#final)| BalanceRow { party, initial, r#final })
            .collect(),
        journal_head: journal.head_hex(),
        journal_len: journal.len(),
        checks,
        journal,
    }
}

/// Every settlement with a payment is matched by its own transfer row,
/// and each party's transfer rows net to its final wealth.
fn reconcile(parties: &[(String, u64, u64)], transfers: &[TransferRow], cycles: &[CycleRow]) -> bool {
    let mut used = vec![false; transfers.len()];
    for c in cycles.iter().filter(|c| c.transferred > 0) {
        let hit = transfers.iter().enumerate().position(|(i, t)| {
            !used[i]
                && t.tick == c.period_end
                && t.from == c.payer
                && t.to == c.receiver
                && t.amount == c.transferred
                && t.bucket == Bucket::Margin.as_str()
        });
        match hit {
            Some(i) => used[i] = true,
            None => return false,
        }
    }
    parties.iter().all(|(party, initial, fin)| {
        let minted: i128 = transfers
            .iter()
            .filter(|t| t.from == MINT_SOURCE && &t.to == party)
            .map(|t| t.amount as i128)
            .sum();
        let net: i128 = transfers
            .iter()
            .map(|t| {
                let mut d = 0i128;
                if &t.to == party {
                    d += t.amount as i128;
                }
                if &t.from == party {
                    d -= t.amount as i128;
                }
                d
            })
            .sum();
        minted == *initial as i128 && net == *fin as i128
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "text" => Ok(ReportFormat::Text),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Text => "txt",
        }
    }
}

pub const CSV_HEADER: &str =
    "cycle,period_start,period_end,present_value,settlement,settlement_minor,payer,receiver,transferred,full";

pub fn render(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Text => render_text(report),
    }
}

fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &report.cycles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.cycle,
            c.period_start,
            c.period_end,
            c.present_value,
            c.settlement,
            c.settlement_minor,
            c.payer,
            c.receiver,
            c.transferred,
            c.full
        );
    }
    out
}

fn ok(flag: bool) -> &'static str {
    if flag {
        "ok"
    } else {
        "FAILED"
    }
}

fn render_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "contract: {}", report.contract);
    let _ = writeln!(out, "mode: {}", report.mode);
    let _ = writeln!(out, "seed: {}", report.seed);
    match &report.outcome {
        Outcome::Terminated { cause, at } => {
            let _ = writeln!(out, "termination: {cause} at tick {at}");
        }
        other => {
            let _ = writeln!(out, "termination: none ({other})");
        }
    }
    let _ = writeln!(out, "cycles: {}", report.cycles.len());
    for c in &report.cycles {
        let _ = writeln!(
            out,
            "  cycle {} [{}, {}] V={} F={} ({} minor) {} -> {} transferred {}{}",
            c.cycle,
            c.period_start,
            c.period_end,
            c.present_value,
            c.settlement,
            c.settlement_minor,
            c.payer,
            c.receiver,
            c.transferred,
            if c.full { "" } else { " (partial)" }
        );
    }
    let _ = writeln!(out, "transfers: {}", report.transfers.len());
    for t in &report.transfers {
        let _ = writeln!(
            out,
            "  #{} tick {} {} -> {} {} ({})",
            t.block, t.tick, t.from, t.to, t.amount, t.bucket
        );
    }
    let _ = writeln!(out, "balances:");
    for b in &report.balances {
        let delta = b.r#final as i128 - b.initial as i128;
        let _ = writeln!(out, "  {} initial {} final {} ({delta:+})", b.party, b.initial, b.r#final);
    }
    let _ = writeln!(out, "journal: {} blocks, head {}", report.journal_len, report.journal_head);
    let c = &report.checks;
    let _ = writeln!(
        out,
        "checks: conservation {} | journal {} | reconciliation {} | windows {} | time {}",
        ok(c.conservation),
        ok(c.journal_verified),
        ok(c.reconciliation),
        ok(c.windows),
        ok(c.monotone_time)
    );
    out
}

pub fn write_report(report: &RunReport, path: &Path, format: ReportFormat) -> std::io::Result<()> {
    crate::io::write_atomic(path, render(report, format).as_bytes())
}
