//! End-to-end runs: scenario in, report and journal out.

pub mod agents;
pub mod market;
pub mod report;
pub mod scenario;

use std::path::PathBuf;

use thiserror::Error;

pub use agents::{AgentPolicy, Counterparties};
pub use market::{generate_path, NormalStream};
pub use report::{render, write_report, Checks, CycleRow, Outcome, ReportFormat, RunReport, TransferRow};
pub use scenario::{load_scenario, parse_scenario, MarketModel, RunMode, Scenario, ScenarioError};

use crate::contract::ContractState;
use crate::journal::DecodeError;
use crate::ledger::{AccountId, Amount, Ledger, LedgerError};
use crate::scheduler::{read_script, script_from_journal, Engine, EngineError, RejectReason, RequestOutcome, ScriptError, StepOutcome};
use crate::valuation::{margin_buffer, settlement_amount, MarginOracle, MarketSnapshot, MarketStore, PricerRegistry, ValuationError};
use report::ReportInputs;

pub const ISSUER_LABEL: &str = "central-bank";
pub const ORACLE_LABEL: &str = "valuation-oracle";
pub const MIN_CALIBRATION_TRIALS: usize = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error("driver script {path}: {source}")]
    Script { path: PathBuf, source: ScriptError },
    #[error("cannot derive a driver script: {0}")]
    Replay(#[from] DecodeError),
    #[error("calibration needs at least {MIN_CALIBRATION_TRIALS} trials, got {0}")]
    TooFewTrials(usize),
}

struct Setup {
    engine: Engine,
    parties: [(AccountId, Amount); 2],
    oracle_account: AccountId,
}

fn market_store(scenario: &Scenario) -> Result<MarketStore, ValuationError> {
    match &scenario.path_file {
        Some(pf) => MarketStore::from_path(pf.snapshots.clone()),
        None => MarketStore::from_path(generate_path(&scenario.market, scenario.seed, scenario.maturity_tick())),
    }
}

fn setup(scenario: &Scenario) -> Result<Setup, SimError> {
    let mut ledger = Ledger::new(ISSUER_LABEL)?;
    let issuer = ledger.issuer().clone();
    let a = ledger.open_account(&scenario.party_a)?;
    let b = ledger.open_account(&scenario.party_b)?;
    let oracle_account = ledger.open_account(ORACLE_LABEL)?;
    ledger.mint(&issuer, &a, scenario.funding_a)?;
    ledger.mint(&issuer, &b, scenario.funding_b)?;
    let spec = scenario.contract_spec(a.clone(), b.clone())?;
    let oracle = MarginOracle::new(PricerRegistry::default(), market_store(scenario)?);
    let policy = Counterparties {
        a: scenario.policy_a,
        b: scenario.policy_b,
        // Path files carry no model drift.
        drift: if scenario.path_file.is_some() { 0.0 } else { scenario.market.drift },
    };
    let engine = Engine::new(ledger, spec, oracle, Box::new(policy))?.with_oracle_account(oracle_account.clone());
    Ok(Setup {
        engine,
        parties: [(a, scenario.funding_a), (b, scenario.funding_b)],
        oracle_account,
    })
}

/// Runs the scenario under its configured mode.
pub fn run_simulation(scenario: &Scenario) -> Result<RunReport, SimError> {
    run_with_mode(scenario, scenario.mode)
}

pub fn run_with_mode(scenario: &Scenario, mode: RunMode) -> Result<RunReport, SimError> {
    let Setup {
        mut engine,
        parties,
        oracle_account,
    } = setup(scenario)?;
    let failure = match mode {
        RunMode::Active => engine.run_active().err().map(|e| e.to_string()),
        RunMode::Passive => run_passive(&mut engine, &parties, &oracle_account),
        RunMode::Driver => {
            let script = match &scenario.driver_script {
                Some(path) => read_script(path).map_err(|source| SimError::Script {
                    path: path.clone(),
                    source,
                })?,
                None => {
                    let reference = run_with_mode(scenario, RunMode::Active)?;
                    script_from_journal(&reference.journal)?
                }
            };
            engine.run_driver(&script);
            None
        }
    };
    let outcome = outcome_of(&engine, failure);
    let ledger = engine.ledger();
    let inputs = ReportInputs {
        contract: &scenario.contract.id,
        mode: mode.as_str(),
        seed: scenario.seed,
        outcome,
        parties: parties
            .iter()
            .map(|(id, funding)| (id.as_str().to_string(), funding.0, ledger.wealth_of(id).0))
            .collect(),
        ledger_conserved: ledger.is_conserved(),
    };
    let (ledger, _, _) = engine.into_parts();
    Ok(report::build_report(ledger.into_journal(), inputs))
}

/// Requesters take turns: party A, party B, the oracle account. Each due
/// event is first requested one tick early, which must be refused.
fn run_passive(engine: &mut Engine, parties: &[(AccountId, Amount); 2], oracle: &AccountId) -> Option<String> {
    let requesters = [&parties[0].0, &parties[1].0, oracle];
    let mut turn = 0usize;
    while let Some(due) = engine.next_due() {
        let who = requesters[turn % requesters.len()];
        turn += 1;
        if due.tick > engine.clock() {
            let early = engine.request_event(who, due.kind, due.tick - 1);
            debug_assert!(matches!(early, RequestOutcome::Rejected(RejectReason::NotDue { .. })));
        }
        match engine.request_event(who, due.kind, due.tick) {
            RequestOutcome::Accepted(StepOutcome::ValuationUnavailable { suspended: true }) => break,
            RequestOutcome::Accepted(_) => {}
            RequestOutcome::Rejected(reason) => return Some(reason.to_string()),
        }
    }
    None
}

fn outcome_of(engine: &Engine, failure: Option<String>) -> Outcome {
    match engine.contract().state() {
        ContractState::Terminated { cause, at } => Outcome::Terminated { cause: *cause, at: *at },
        ContractState::Error { detail } => Outcome::Suspended {
            at: engine.clock(),
            detail: detail.clone(),
        },
        ContractState::PreCheck => Outcome::NotStarted {
            reason: failure.unwrap_or_else(|| "never activated".to_string()),
        },
        state => Outcome::Incomplete {
            state: match failure {
                Some(f) => format!("{state}: {f}"),
                None => state.to_string(),
            },
        },
    }
}

/// `trials` independent one-period settlement amounts for the scenario's
/// first period, spot moving under the market model from the initial
/// snapshot.
pub fn sample_settlement_amounts(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<f64>, SimError> {
    let product = scenario.product()?;
    let start = scenario.contract.start;
    let end = start + scenario.contract.settlement_interval;
    let scale = scenario.scale();
    let dt = scale.years(end - start);
    let init = scenario.initial_snapshot()?;
    let registry = PricerRegistry::default();
    let pricer = registry.get(&scenario.contract.pricer)?;
    let mut z = NormalStream::new(seed, market::CALIBRATION_STREAM);
    (0..trials)
        .map(|_| {
            let moved = MarketSnapshot {
                as_of: end,
                spot: scenario.market.step(init.spot, dt, z.next_normal()),
                zero_rate: init.zero_rate,
            };
            let f = settlement_amount(pricer.as_ref(), &product, scale, start, end, &init, &moved)?;
            Ok(f.value)
        })
        .collect()
}

/// Quantile buffer from `trials` samples drawn with the scenario seed,
/// floored at one minor unit.
pub fn calibrate_buffer(scenario: &Scenario, q: f64, trials: usize) -> Result<Amount, SimError> {
    calibrate_with_seed(scenario, q, trials, scenario.seed)
}

pub fn calibrate_with_seed(scenario: &Scenario, q: f64, trials: usize, seed: u64) -> Result<Amount, SimError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(ValuationError::InvalidQuantile(q).into());
    }
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(SimError::TooFewTrials(trials));
    }
    let samples = sample_settlement_amounts(scenario, trials, seed)?;
    Ok(margin_buffer(&samples, q)?.max(Amount(1)))
}
