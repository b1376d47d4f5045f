//! Scenario files.
//!
//! Line-oriented `key = value` pairs grouped in four mandatory sections.
//! `#` starts a comment. Unknown sections or keys are rejected.
//!
//! ```text
//! [contract]
//! id = sdc-1
//! product = forward            # forward | swap
//! notional = 1000000           # minor units per index point (forward) or per unit of rate (swap)
//! strike = atm                 # forward: number or `atm`
//! fixed_rate = par             # swap: number or `par`
//! payment_interval = 7         # swap: ticks between fixed/floating payments
//! start = 0
//! settlement_interval = 7
//! settlements = 4
//! prefund_window = 2
//! margin_buffer = 5000000      # or margin_buffer_a / margin_buffer_b
//! termination_fee = 2000000    # or termination_fee_a / termination_fee_b
//! pricer = flat-curve-v1
//! valuation_retries = 2
//!
//! [market]
//! spot = 100
//! rate = 0.02
//! volatility = 0.2
//! drift = 0.0
//! tick_years = 0.00273972602739726
//! path = market.csv            # optional explicit path, relative to the scenario file
//!
//! [agents]
//! party_a = bank1
//! party_b = bank2
//! policy_a = compliant         # compliant | defaulting:<cycle> | willful:<threshold>
//! policy_b = compliant
//! funding_a = 20000000
//! funding_b = 20000000
//!
//! [run]
//! seed = 42
//! mode = active                # active | passive | driver
//! driver_script = replay.csv   # optional, driver mode only
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::agents::AgentPolicy;
use crate::contract::ContractSpec;
use crate::ledger::{AccountId, Amount, ContractId, Ledger};
use crate::valuation::{self, MarketSnapshot, OracleBinding, ProductSpec, TickScale, FLAT_CURVE_V1};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("scenario is missing the [{0}] section")]
    MissingSection(&'static str),
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("cannot read scenario {path}: {reason}")]
    Io { path: String, reason: String },
}

impl ScenarioError {
    fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Active,
    Passive,
    Driver,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Active => "active",
            RunMode::Passive => "passive",
            RunMode::Driver => "driver",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(RunMode::Active),
            "passive" => Ok(RunMode::Passive),
            "driver" => Ok(RunMode::Driver),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// A level that is either given or derived from the initial market.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Level {
    /// At-the-money strike or par swap rate at the contract start.
    AtMarket,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProductTerms {
    Forward { strike: Level },
    Swap { fixed_rate: Level, payment_interval: Tick },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractTerms {
    pub id: String,
    pub product: ProductTerms,
    pub notional: f64,
    pub start: Tick,
    pub settlement_interval: Tick,
    pub settlements: usize,
    pub prefund_window: Tick,
    pub margin_a: Amount,
    pub margin_b: Amount,
    pub fee_a: Amount,
    pub fee_b: Amount,
    pub pricer: String,
    pub valuation_retries: u32,
}

/// Geometric Brownian spot with a constant flat rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketModel {
    pub spot: f64,
    pub rate: f64,
    pub volatility: f64,
    pub drift: f64,
    pub tick_years: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathFile {
    pub path: PathBuf,
    pub snapshots: Vec<MarketSnapshot>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub contract: ContractTerms,
    pub market: MarketModel,
    pub path_file: Option<PathFile>,
    pub party_a: String,
    pub party_b: String,
    pub policy_a: AgentPolicy,
    pub policy_b: AgentPolicy,
    pub funding_a: Amount,
    pub funding_b: Amount,
    pub seed: u64,
    pub mode: RunMode,
    pub driver_script: Option<PathBuf>,
}

impl Scenario {
    pub fn settlement_times(&self) -> Vec<Tick> {
        let c = &self.contract;
        (1..=c.settlements as u64)
            .map(|k| c.start + k * c.settlement_interval)
            .collect()
    }

    pub fn maturity_tick(&self) -> Tick {
        self.contract.start + self.contract.settlements as u64 * self.contract.settlement_interval
    }

    pub fn scale(&self) -> TickScale {
        TickScale(self.market.tick_years)
    }

    /// Market data at the contract start.
    pub fn initial_snapshot(&self) -> Result<MarketSnapshot, ScenarioError> {
        let start = self.contract.start;
        match &self.path_file {
            Some(pf) => pf
                .snapshots
                .iter()
                .find(|s| s.as_of == start)
                .copied()
                .ok_or_else(|| {
                    ScenarioError::validation("path", format!("no snapshot at start tick {start}"))
                }),
            None => MarketSnapshot::new(start, self.market.spot, self.market.rate)
                .map_err(|e| ScenarioError::validation("spot", e.to_string())),
        }
    }

    pub fn product(&self) -> Result<ProductSpec, ScenarioError> {
        let c = &self.contract;
        let scale = self.scale();
        let init = self.initial_snapshot()?;
        let maturity = self.maturity_tick();
        Ok(match c.product {
            ProductTerms::Forward { strike } => ProductSpec::Forward {
                notional: c.notional,
                strike: match strike {
                    Level::AtMarket => init.spot,
                    Level::Fixed(k) => k,
                },
                maturity: scale.years(maturity),
            },
            ProductTerms::Swap {
                fixed_rate,
                payment_interval,
            } => {
                let mut ticks = Vec::new();
                let mut t = c.start;
                while t < maturity {
                    t = (t + payment_interval).min(maturity);
                    ticks.push(t);
                }
                let payment_times: Vec<f64> = ticks.iter().map(|&t| scale.years(t)).collect();
                let mut prev = c.start;
                let accruals: Vec<f64> = ticks
                    .iter()
                    .map(|&t| {
                        let a = scale.years(t - prev);
                        prev = t;
                        a
                    })
                    .collect();
                let k = match fixed_rate {
                    Level::Fixed(k) => k,
                    Level::AtMarket => valuation::par_rate(
                        &payment_times,
                        &accruals,
                        scale.years(c.start),
                        &init,
                    )
                    .map_err(|e| ScenarioError::validation("fixed_rate", e.to_string()))?,
                };
                ProductSpec::VanillaSwap {
                    notional: c.notional,
                    fixed_rate: k,
                    payment_times,
                    accruals,
                }
            }
        })
    }

    pub fn contract_spec(&self, party_a: AccountId, party_b: AccountId) -> Result<ContractSpec, ScenarioError> {
        let c = &self.contract;
        let spec = ContractSpec {
            id: ContractId::new(c.id.clone()),
            party_a,
            party_b,
            product: self.product()?,
            start: c.start,
            settlement_times: self.settlement_times(),
            margin_a: c.margin_a,
            margin_b: c.margin_b,
            fee_a: c.fee_a,
            fee_b: c.fee_b,
            prefund_window: c.prefund_window,
            oracle: OracleBinding {
                pricer_version: c.pricer.clone(),
                tick_years: self.market.tick_years,
            },
            valuation_retries: c.valuation_retries,
        };
        spec.validate()
            .map_err(|e| ScenarioError::validation(e.field, e.reason))?;
        Ok(spec)
    }

    /// Runs every check a run would hit before touching any market data.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let m = &self.market;
        if !(m.tick_years.is_finite() && m.tick_years > 0.0) {
            return Err(ScenarioError::validation("tick_years", "must be positive"));
        }
        if !(m.volatility.is_finite() && m.volatility >= 0.0) {
            return Err(ScenarioError::validation("volatility", "must be non-negative"));
        }
        if !m.drift.is_finite() {
            return Err(ScenarioError::validation("drift", "must be finite"));
        }
        if self.party_a == self.party_b {
            return Err(ScenarioError::validation("party_b", "parties must differ"));
        }
        if self.contract.settlements == 0 {
            return Err(ScenarioError::validation("settlements", "must be at least 1"));
        }
        if self.contract.settlement_interval == 0 {
            return Err(ScenarioError::validation("settlement_interval", "must be at least 1"));
        }
        if let ProductTerms::Swap { payment_interval: 0, .. } = self.contract.product {
            return Err(ScenarioError::validation("payment_interval", "must be at least 1"));
        }
        if self.driver_script.is_some() && self.mode != RunMode::Driver {
            return Err(ScenarioError::validation("driver_script", "only valid with mode = driver"));
        }
        let mut ledger = Ledger::new("validation").expect("non-empty label");
        let a = ledger
            .open_account(&self.party_a)
            .map_err(|e| ScenarioError::validation("party_a", e.to_string()))?;
        let b = ledger
            .open_account(&self.party_b)
            .map_err(|e| ScenarioError::validation("party_b", e.to_string()))?;
        self.contract_spec(a, b)?;
        Ok(())
    }
}

const SECTIONS: [&str; 4] = ["contract", "market", "agents", "run"];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "contract" => &[
            "id",
            "product",
            "notional",
            "strike",
            "fixed_rate",
            "payment_interval",
            "start",
            "settlement_interval",
            "settlements",
            "prefund_window",
            "margin_buffer",
            "margin_buffer_a",
            "margin_buffer_b",
            "termination_fee",
            "termination_fee_a",
            "termination_fee_b",
            "pricer",
            "valuation_retries",
        ],
        "market" => &["spot", "rate", "volatility", "drift", "tick_years", "path"],
        "agents" => &[
            "party_a", "party_b", "policy_a", "policy_b", "funding_a", "funding_b",
        ],
        "run" => &["seed", "mode", "driver_script"],
        _ => &[],
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Sections {
    map: BTreeMap<(&'static str, String), Entry>,
}

impl Sections {
    fn raw(&self, section: &'static str, key: &str) -> Option<&Entry> {
        self.map.get(&(section, key.to_string()))
    }

    fn parsed<T: FromStr>(&self, section: &'static str, key: &str) -> Result<Option<T>, ScenarioError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| ScenarioError::Parse {
                line: e.line,
                reason: format!("cannot parse `{key}` value {:?}", e.value),
            }),
        }
    }

    fn required<T: FromStr>(&self, section: &'static str, key: &str) -> Result<T, ScenarioError> {
        self.parsed(section, key)?.ok_or_else(|| {
            ScenarioError::validation(key, format!("required key missing from [{section}]"))
        })
    }

    fn string(&self, section: &'static str, key: &str, default: &str) -> String {
        self.raw(section, key)
            .map_or_else(|| default.to_string(), |e| e.value.clone())
    }

    /// Signed parse so that negative amounts surface as validation errors
    /// naming the field rather than as syntax errors.
    fn amount(&self, section: &'static str, key: &str) -> Result<Option<Amount>, ScenarioError> {
        match self.parsed::<i128>(section, key)? {
            None => Ok(None),
            Some(v) if v < 0 => Err(ScenarioError::validation(key, "must not be negative")),
            Some(v) => u64::try_from(v)
                .map(|v| Some(Amount(v)))
                .map_err(|_| ScenarioError::validation(key, "too large")),
        }
    }

    /// `<base>_a` / `<base>_b`, each falling back to `<base>`.
    fn per_party(&self, section: &'static str, base: &str) -> Result<(Amount, Amount), ScenarioError> {
        let shared = self.amount(section, base)?;
        let field = |suffix: &str| -> Result<Amount, ScenarioError> {
            let key = format!("{base}_{suffix}");
            self.amount(section, &key)?
                .or(shared)
                .ok_or_else(|| ScenarioError::validation(key, format!("set `{base}` or `{base}_a`/`{base}_b`")))
        };
        Ok((field("a")?, field("b")?))
    }

    fn level(&self, key: &str, at_market: &str) -> Result<Level, ScenarioError> {
        let e = self
            .raw("contract", key)
            .ok_or_else(|| ScenarioError::validation(key, "required for this product"))?;
        if e.value == at_market {
            return Ok(Level::AtMarket);
        }
        e.value.parse().map(Level::Fixed).map_err(|_| ScenarioError::Parse {
            line: e.line,
            reason: format!("`{key}` must be a number or `{at_market}`"),
        })
    }

    fn policy(&self, key: &str) -> Result<AgentPolicy, ScenarioError> {
        match self.raw("agents", key) {
            None => Ok(AgentPolicy::Compliant),
            Some(e) => e.value.parse().map_err(|reason| ScenarioError::Parse {
                line: e.line,
                reason,
            }),
        }
    }
}

fn tokenize(text: &str) -> Result<Sections, ScenarioError> {
    let mut map = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut seen = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |reason: String| ScenarioError::Parse { line, reason };
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            let sec = SECTIONS
                .into_iter()
                .find(|s| *s == name)
                .ok_or_else(|| err(format!("unknown section [{name}]")))?;
            if seen.contains(&sec) {
                return Err(err(format!("duplicate section [{sec}]")));
            }
            seen.push(sec);
            current = Some(sec);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = current.ok_or_else(|| err("key outside of a section".into()))?;
        if !known_keys(sec).contains(&key) {
            return Err(err(format!("unknown key `{key}` in [{sec}]")));
        }
        if value.is_empty() {
            return Err(err(format!("empty value for `{key}`")));
        }
        if map
            .insert(
                (sec, key.to_string()),
                Entry {
                    value: value.to_string(),
                    line,
                },
            )
            .is_some()
        {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    for sec in SECTIONS {
        if !seen.contains(&sec) {
            return Err(ScenarioError::MissingSection(sec));
        }
    }
    Ok(Sections { map })
}

/// Parses scenario text. Relative `path` and `driver_script` entries are
/// resolved against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let s = tokenize(text)?;

    let product = match s.string("contract", "product", "").as_str() {
        "forward" => ProductTerms::Forward {
            strike: s.level("strike", "atm")?,
        },
        "swap" => ProductTerms::Swap {
            fixed_rate: s.level("fixed_rate", "par")?,
            payment_interval: match s.parsed("contract", "payment_interval")? {
                Some(p) => p,
                None => s.required("contract", "settlement_interval")?,
            },
        },
        "" => return Err(ScenarioError::validation("product", "required key missing from [contract]")),
        other => {
            let line = s.raw("contract", "product").map_or(0, |e| e.line);
            return Err(ScenarioError::Parse {
                line,
                reason: format!("unknown product {other:?}"),
            });
        }
    };
    let (margin_a, margin_b) = s.per_party("contract", "margin_buffer")?;
    let (fee_a, fee_b) = s.per_party("contract", "termination_fee")?;
    let contract = ContractTerms {
        id: s.string("contract", "id", "sdc-1"),
        product,
        notional: s.required("contract", "notional")?,
        start: s.parsed("contract", "start")?.unwrap_or(0),
        settlement_interval: s.required("contract", "settlement_interval")?,
        settlements: s.required("contract", "settlements")?,
        prefund_window: s.required("contract", "prefund_window")?,
        margin_a,
        margin_b,
        fee_a,
        fee_b,
        pricer: s.string("contract", "pricer", FLAT_CURVE_V1),
        valuation_retries: s.parsed("contract", "valuation_retries")?.unwrap_or(2),
    };

    let path_file = match s.raw("market", "path") {
        None => None,
        Some(e) => {
            let path = base_dir.join(&e.value);
            let snapshots = valuation::read_path_file(&path)
                .map_err(|err| ScenarioError::validation("path", err.to_string()))?;
            Some(PathFile { path, snapshots })
        }
    };
    let first = path_file.as_ref().and_then(|p| p.snapshots.first().copied());
    let market = MarketModel {
        spot: match first {
            Some(f) => s.parsed("market", "spot")?.unwrap_or(f.spot),
            None => s.required("market", "spot")?,
        },
        rate: match first {
            Some(f) => s.parsed("market", "rate")?.unwrap_or(f.zero_rate),
            None => s.required("market", "rate")?,
        },
        volatility: match first {
            Some(_) => s.parsed("market", "volatility")?.unwrap_or(0.0),
            None => s.required("market", "volatility")?,
        },
        drift: s.parsed("market", "drift")?.unwrap_or(0.0),
        tick_years: s.required("market", "tick_years")?,
    };

    let mode = match s.raw("run", "mode") {
        None => RunMode::Active,
        Some(e) => e.value.parse().map_err(|reason| ScenarioError::Parse {
            line: e.line,
            reason,
        })?,
    };
    let scenario = Scenario {
        contract,
        market,
        path_file,
        party_a: s.string("agents", "party_a", "bank1"),
        party_b: s.string("agents", "party_b", "bank2"),
        policy_a: s.policy("policy_a")?,
        policy_b: s.policy("policy_b")?,
        funding_a: s
            .amount("agents", "funding_a")?
            .ok_or_else(|| ScenarioError::validation("funding_a", "required key missing from [agents]"))?,
        funding_b: s
            .amount("agents", "funding_b")?
            .ok_or_else(|| ScenarioError::validation("funding_b", "required key missing from [agents]"))?,
        seed: s.required("run", "seed")?,
        mode,
        driver_script: s.raw("run", "driver_script").map(|e| base_dir.join(&e.value)),
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}
