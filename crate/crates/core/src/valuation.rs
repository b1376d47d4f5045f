//! Market snapshots, product pricers, the settlement-amount oracle and
//! quantile margin-buffer sizing.
//!
//! Product times are year fractions; the contract grid runs in integer
//! ticks and [`TickScale`] converts between the two. Notionals are quoted
//! in minor units, so every value produced here is a minor-unit decimal
//! that only gets rounded when it reaches the ledger.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::journal::{EventKind, EventRecord};
use crate::ledger::{Amount, ContractId, Ledger};
use crate::Tick;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValuationError {
    #[error("negative tenor: T={maturity} < t={t}")]
    NegativeTenor { t: f64, maturity: f64 },
    #[error("valuation time {t} is past maturity {maturity}")]
    PastMaturity { t: f64, maturity: f64 },
    #[error("snapshot timestamps do not match the period: expected ({expected_start}, {expected_end}), got ({got_start}, {got_end})")]
    TimestampMismatch {
        expected_start: Tick,
        expected_end: Tick,
        got_start: Tick,
        got_end: Tick,
    },
    #[error("settlement period must satisfy start < end, got {start}..{end}")]
    InvalidPeriod { start: Tick, end: Tick },
    #[error("no market snapshot stored at tick {0}")]
    MissingSnapshot(Tick),
    #[error("no pricer registered under version {0:?}")]
    UnknownPricer(String),
    #[error("invalid market snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("invalid product: {0}")]
    InvalidProduct(String),
    #[error("cannot size a buffer from an empty sample")]
    EmptySamples,
    #[error("quantile level {0} outside (0, 1]")]
    InvalidQuantile(f64),
    #[error("non-finite sample at position {0}")]
    NonFiniteSample(usize),
    #[error("market path file: {0}")]
    PathFile(String),
}

/// Market data observed at one tick: a flat continuously-compounded zero
/// rate and the level of the underlying index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketSnapshot {
    pub as_of: Tick,
    pub spot: f64,
    pub zero_rate: f64,
}

impl MarketSnapshot {
    pub fn new(as_of: Tick, spot: f64, zero_rate: f64) -> Result<Self, ValuationError> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(ValuationError::InvalidSnapshot(format!(
                "spot must be positive and finite, got {spot}"
            )));
        }
        if !zero_rate.is_finite() {
            return Err(ValuationError::InvalidSnapshot(format!(
                "zero rate must be finite, got {zero_rate}"
            )));
        }
        Ok(Self {
            as_of,
            spot,
            zero_rate,
        })
    }

    /// Same market data stamped at a different tick.
    pub fn restamped(self, as_of: Tick) -> Self {
        Self { as_of, ..self }
    }
}

/// Year fraction represented by one simulation tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickScale(pub f64);

impl TickScale {
    pub fn years(self, tick: Tick) -> f64 {
        tick as f64 * self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProductSpec {
    Forward {
        notional: f64,
        strike: f64,
        maturity: f64,
    },
    /// Payer-fixed swap: positive value when floating rates exceed the
    /// fixed rate.
    VanillaSwap {
        notional: f64,
        fixed_rate: f64,
        payment_times: Vec<f64>,
        accruals: Vec<f64>,
    },
}

impl ProductSpec {
    pub fn maturity(&self) -> f64 {
        match self {
            ProductSpec::Forward { maturity, .. } => *maturity,
            ProductSpec::VanillaSwap { payment_times, .. } => {
                payment_times.last().copied().unwrap_or(0.0)
            }
        }
    }

    pub fn notional(&self) -> f64 {
        match self {
            ProductSpec::Forward { notional, .. } | ProductSpec::VanillaSwap { notional, .. } => {
                *notional
            }
        }
    }

    /// Checks the structural invariants relative to the contract start.
    pub fn validate(&self, start: f64) -> Result<(), ValuationError> {
        let bad = |m: &str| Err(ValuationError::InvalidProduct(m.to_string()));
        if !self.notional().is_finite() {
            return bad("notional must be finite");
        }
        match self {
            ProductSpec::Forward {
                strike, maturity, ..
            } => {
                if !strike.is_finite() || !maturity.is_finite() {
                    return bad("forward terms must be finite");
                }
            }
            ProductSpec::VanillaSwap {
                fixed_rate,
                payment_times,
                accruals,
                ..
            } => {
                if !fixed_rate.is_finite() {
                    return bad("fixed rate must be finite");
                }
                if payment_times.is_empty() {
                    return bad("swap needs at least one payment");
                }
                if payment_times.len() != accruals.len() {
                    return bad("one accrual per payment time required");
                }
                if payment_times.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("payment times must be strictly increasing");
                }
                if accruals.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
                    return bad("accruals must be positive");
                }
            }
        }
        if self.maturity() <= start {
            return bad("maturity must lie after the contract start");
        }
        Ok(())
    }
}

/// `exp(-r (T - t))` on the snapshot's flat curve.
pub fn discount_factor(snap: &MarketSnapshot, t: f64, maturity: f64) -> Result<f64, ValuationError> {
    if maturity < t {
        return Err(ValuationError::NegativeTenor { t, maturity });
    }
    Ok((-snap.zero_rate * (maturity - t)).exp())
}

/// Time-`t` value of `product` under the flat-curve model.
pub fn price(product: &ProductSpec, t: f64, snap: &MarketSnapshot) -> Result<f64, ValuationError> {
    let maturity = product.maturity();
    if t > maturity {
        return Err(ValuationError::PastMaturity { t, maturity });
    }
    match product {
        ProductSpec::Forward {
            notional, strike, ..
        } => Ok(notional * (snap.spot - strike) * discount_factor(snap, t, maturity)?),
        ProductSpec::VanillaSwap {
            notional,
            fixed_rate,
            payment_times,
            accruals,
        } => {
            let mut prev_df = 1.0; // df(t, t)
            let mut value = 0.0;
            for (&pay, &tau) in payment_times.iter().zip(accruals).filter(|(&p, _)| p > t) {
                let df = discount_factor(snap, t, pay)?;
                let fwd = (prev_df / df - 1.0) / tau;
                value += tau * (fwd - fixed_rate) * df;
                prev_df = df;
            }
            Ok(notional * value)
        }
    }
}

/// Fixed rate at which the remaining swap schedule prices to zero at `t`.
pub fn par_rate(payment_times: &[f64], accruals: &[f64], t: f64, snap: &MarketSnapshot) -> Result<f64, ValuationError> {
    let mut annuity = 0.0;
    let mut last_df = 1.0;
    for (&pay, &tau) in payment_times.iter().zip(accruals).filter(|(&p, _)| p > t) {
        last_df = discount_factor(snap, t, pay)?;
        annuity += tau * last_df;
    }
    if annuity == 0.0 {
        return Err(ValuationError::PastMaturity {
            t,
            maturity: payment_times.last().copied().unwrap_or(0.0),
        });
    }
    Ok((1.0 - last_df) / annuity)
}

/// A valuation model registered under a version identifier that contracts
/// pin in their oracle binding.
pub trait Pricer: Send + Sync {
    fn version(&self) -> &str;
    fn price(&self, product: &ProductSpec, t: f64, snap: &MarketSnapshot) -> Result<f64, ValuationError>;
}

pub const FLAT_CURVE_V1: &str = "flat-curve-v1";

#[derive(Clone, Copy, Debug, Default)]
pub struct FlatCurvePricer;

impl Pricer for FlatCurvePricer {
    fn version(&self) -> &str {
        FLAT_CURVE_V1
    }

    fn price(&self, product: &ProductSpec, t: f64, snap: &MarketSnapshot) -> Result<f64, ValuationError> {
        price(product, t, snap)
    }
}

#[derive(Clone)]
pub struct PricerRegistry {
    pricers: BTreeMap<String, Arc<dyn Pricer>>,
}

impl PricerRegistry {
    pub fn empty() -> Self {
        Self {
            pricers: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, pricer: Arc<dyn Pricer>) {
        self.pricers.insert(pricer.version().to_string(), pricer);
    }

    pub fn get(&self, version: &str) -> Result<&Arc<dyn Pricer>, ValuationError> {
        self.pricers
            .get(version)
            .ok_or_else(|| ValuationError::UnknownPricer(version.to_string()))
    }
}

impl Default for PricerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FlatCurvePricer));
        r
    }
}

impl fmt::Debug for PricerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.pricers.keys()).finish()
    }
}

/// Net cash flow for one settlement period. Positive means party B pays
/// party A.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SettlementAmount {
    pub value: f64,
    pub as_of: Tick,
}

impl SettlementAmount {
    /// Rounded half away from zero to whole minor units.
    pub fn to_minor(self) -> i64 {
        self.value.round() as i64
    }
}

/// `V(t_next, M(t_next)) - V(t_next, M(t_i))`.
pub fn settlement_amount(
    pricer: &dyn Pricer,
    product: &ProductSpec,
    scale: TickScale,
    t_i: Tick,
    t_next: Tick,
    snap_old: &MarketSnapshot,
    snap_new: &MarketSnapshot,
) -> Result<SettlementAmount, ValuationError> {
    if t_i >= t_next {
        return Err(ValuationError::InvalidPeriod {
            start: t_i,
            end: t_next,
        });
    }
    if snap_old.as_of != t_i || snap_new.as_of != t_next {
        return Err(ValuationError::TimestampMismatch {
            expected_start: t_i,
            expected_end: t_next,
            got_start: snap_old.as_of,
            got_end: snap_new.as_of,
        });
    }
    let t = scale.years(t_next);
    let v_new = pricer.price(product, t, snap_new)?;
    let v_old = pricer.price(product, t, snap_old)?;
    Ok(SettlementAmount {
        value: v_new - v_old,
        as_of: t_next,
    })
}

/// Time-ordered store of snapshots; single writer, appends only forward.
#[derive(Clone, Debug, Default)]
pub struct MarketStore {
    snaps: BTreeMap<Tick, MarketSnapshot>,
}

impl MarketStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_path(path: Vec<MarketSnapshot>) -> Result<Self, ValuationError> {
        let mut s = Self::new();
        for snap in path {
            s.insert(snap)?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, snap: MarketSnapshot) -> Result<(), ValuationError> {
        if let Some((&last, _)) = self.snaps.last_key_value() {
            if snap.as_of <= last {
                return Err(ValuationError::InvalidSnapshot(format!(
                    "as_of {} does not advance past {last}",
                    snap.as_of
                )));
            }
        }
        self.snaps.insert(snap.as_of, snap);
        Ok(())
    }

    pub fn remove(&mut self, tick: Tick) -> Option<MarketSnapshot> {
        self.snaps.remove(&tick)
    }

    pub fn get(&self, tick: Tick) -> Result<&MarketSnapshot, ValuationError> {
        self.snaps
            .get(&tick)
            .ok_or(ValuationError::MissingSnapshot(tick))
    }

    pub fn contains(&self, tick: Tick) -> bool {
        self.snaps.contains_key(&tick)
    }

    pub fn len(&self) -> usize {
        self.snaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snaps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MarketSnapshot> {
        self.snaps.values()
    }
}

/// Reads a `time,spot,zero_rate` CSV market path.
pub fn read_path_file(path: &Path) -> Result<Vec<MarketSnapshot>, ValuationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ValuationError::PathFile(format!("{}: {e}", path.display())))?;
    parse_path_csv(&text)
}

pub fn parse_path_csv(text: &str) -> Result<Vec<MarketSnapshot>, ValuationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| ValuationError::PathFile(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "spot", "zero_rate"] {
        return Err(ValuationError::PathFile(
            "header must be `time,spot,zero_rate`".into(),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| ValuationError::PathFile(format!("line {line}: {e}")))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let time: Tick = field(0)
            .parse()
            .map_err(|_| ValuationError::PathFile(format!("line {line}: bad time")))?;
        let spot: f64 = field(1)
            .parse()
            .map_err(|_| ValuationError::PathFile(format!("line {line}: bad spot")))?;
        let rate: f64 = field(2)
            .parse()
            .map_err(|_| ValuationError::PathFile(format!("line {line}: bad zero_rate")))?;
        let snap = MarketSnapshot::new(time, spot, rate)
            .map_err(|e| ValuationError::PathFile(format!("line {line}: {e}")))?;
        if out.last().is_some_and(|p: &MarketSnapshot| p.as_of >= time) {
            return Err(ValuationError::PathFile(format!(
                "line {line}: time must strictly increase"
            )));
        }
        out.push(snap);
    }
    Ok(out)
}

/// Which pricer a contract uses and how ticks map to year fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleBinding {
    pub pricer_version: String,
    pub tick_years: f64,
}

impl OracleBinding {
    pub fn scale(&self) -> TickScale {
        TickScale(self.tick_years)
    }
}

/// A cached oracle answer for one settlement period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quote {
    pub amount: SettlementAmount,
    /// `V(t_next, M(t_next))`, reported alongside the settlement amount.
    pub present_value: f64,
}

/// The agreed single source of settlement amounts.
///
/// Each `(contract, period)` is computed once; later queries return the
/// stored quote and do not journal again.
#[derive(Debug, Default)]
pub struct MarginOracle {
    registry: PricerRegistry,
    store: MarketStore,
    cache: BTreeMap<(ContractId, Tick, Tick), Quote>,
}

impl MarginOracle {
    pub fn new(registry: PricerRegistry, store: MarketStore) -> Self {
        Self {
            registry,
            store,
            cache: BTreeMap::new(),
        }
    }

    pub fn store(&self) -> &MarketStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut MarketStore {
        &mut self.store
    }

    pub fn registry(&self) -> &PricerRegistry {
        &self.registry
    }

    pub fn quote(&self, contract: &ContractId, start: Tick, end: Tick) -> Option<&Quote> {
        self.cache.get(&(contract.clone(), start, end))
    }

    /// Whether a query for this period can currently succeed.
    pub fn is_available(&self, start: Tick, end: Tick) -> bool {
        self.store.contains(start) && self.store.contains(end)
    }

    pub fn query(
        &mut self,
        ledger: &mut Ledger,
        contract: &ContractId,
        binding: &OracleBinding,
        product: &ProductSpec,
        period_start: Tick,
        period_end: Tick,
    ) -> Result<SettlementAmount, ValuationError> {
        let key = (contract.clone(), period_start, period_end);
        if let Some(q) = self.cache.get(&key) {
            return Ok(q.amount);
        }
        let old = *self.store.get(period_start)?;
        let new = *self.store.get(period_end)?;
        let pricer = self.registry.get(&binding.pricer_version)?;
        let amount = settlement_amount(
            pricer.as_ref(),
            product,
            binding.scale(),
            period_start,
            period_end,
            &old,
            &new,
        )?;
        let present_value = pricer.price(product, binding.scale().years(period_end), &new)?;
        let rec = EventRecord::new(ledger.now(), EventKind::Valuation, binding.pricer_version.as_str())
            .with("contract", contract)
            .with("period_start", period_start)
            .with("period_end", period_end)
            .with("settlement", format!("{:?}", amount.value))
            .with("settlement_minor", amount.to_minor())
            .with("present_value", format!("{present_value:?}"));
        ledger.record(rec);
        self.cache.insert(
            key,
            Quote {
                amount,
                present_value,
            },
        );
        Ok(amount)
    }
}

/// Nearest-rank `q`-quantile of `|samples|`, rounded up to whole minor
/// units.
pub fn margin_buffer(samples: &[f64], q: f64) -> Result<Amount, ValuationError> {
    if samples.is_empty() {
        return Err(ValuationError::EmptySamples);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(ValuationError::InvalidQuantile(q));
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(ValuationError::NonFiniteSample(i));
    }
    let mut abs: Vec<f64> = samples.iter().map(|s| s.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    Ok(Amount(abs[rank - 1].ceil() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(as_of: Tick, spot: f64, r: f64) -> MarketSnapshot {
        MarketSnapshot::new(as_of, spot, r).unwrap()
    }

    #[test]
    fn discount_factor_cases() {
        let s = snap(0, 100.0, 0.05);
        assert_eq!(discount_factor(&s, 1.5, 1.5).unwrap(), 1.0);
        assert_eq!(discount_factor(&snap(0, 1.0, 0.0), 0.0, 30.0).unwrap(), 1.0);
        let df = discount_factor(&s, 1.0, 3.0).unwrap();
        assert!((df - 0.904_837_418_035_959_6).abs() < 1e-15);
        assert!(matches!(
            discount_factor(&s, 2.0, 1.0),
            Err(ValuationError::NegativeTenor { .. })
        ));
    }

    #[test]
    fn forward_prices() {
        let at_strike = ProductSpec::Forward {
            notional: 1e6,
            strike: 100.0,
            maturity: 2.0,
        };
        for r in [0.0, 0.03, -0.01] {
            for t in [0.0, 0.7, 2.0] {
                assert_eq!(price(&at_strike, t, &snap(0, 100.0, r)).unwrap(), 0.0);
            }
        }
        let fwd = ProductSpec::Forward {
            notional: 1.0,
            strike: 100.0,
            maturity: 1.0,
        };
        assert_eq!(price(&fwd, 0.0, &snap(0, 105.0, 0.0)).unwrap(), 5.0);
        assert!(matches!(
            price(&fwd, 1.5, &snap(0, 105.0, 0.0)),
            Err(ValuationError::PastMaturity { .. })
        ));
    }

    #[test]
    fn swap_at_par_is_worthless() {
        let times: Vec<f64> = (1..=8).map(|k| k as f64 * 0.5).collect();
        let accr = vec![0.5; 8];
        let s = snap(0, 1.0, 0.031);
        let k = par_rate(&times, &accr, 0.0, &s).unwrap();
        let swap = ProductSpec::VanillaSwap {
            notional: 1.0,
            fixed_rate: k,
            payment_times: times,
            accruals: accr,
        };
        assert!(price(&swap, 0.0, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn swap_after_last_payment_is_zero() {
        let swap = ProductSpec::VanillaSwap {
            notional: 1e6,
            fixed_rate: 0.02,
            payment_times: vec![1.0, 2.0],
            accruals: vec![1.0, 1.0],
        };
        assert_eq!(price(&swap, 2.0, &snap(0, 1.0, 0.05)).unwrap(), 0.0);
    }

    #[test]
    fn settlement_amount_rules() {
        let fwd = ProductSpec::Forward {
            notional: 10.0,
            strike: 100.0,
            maturity: 1.0,
        };
        let p = FlatCurvePricer;
        let scale = TickScale(0.01);
        let old = snap(10, 101.0, 0.0);
        let same = old.restamped(20);
        let f = settlement_amount(&p, &fwd, scale, 10, 20, &old, &same).unwrap();
        assert_eq!(f.value, 0.0);
        let new = snap(20, 104.0, 0.0);
        let f = settlement_amount(&p, &fwd, scale, 10, 20, &old, &new).unwrap();
        assert_eq!(f.value, 30.0);
        assert_eq!(f.as_of, 20);
        assert!(matches!(
            settlement_amount(&p, &fwd, scale, 10, 21, &old, &new),
            Err(ValuationError::TimestampMismatch { .. })
        ));
        assert!(matches!(
            settlement_amount(&p, &fwd, scale, 20, 20, &new, &new),
            Err(ValuationError::InvalidPeriod { .. })
        ));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        let m = |v| SettlementAmount { value: v, as_of: 0 }.to_minor();
        assert_eq!(m(2.5), 3);
        assert_eq!(m(-2.5), -3);
        assert_eq!(m(2.4999), 2);
        assert_eq!(m(-0.4), 0);
    }

    #[test]
    fn oracle_caches_and_journals_once() {
        let fwd = ProductSpec::Forward {
            notional: 1.0,
            strike: 100.0,
            maturity: 1.0,
        };
        let store = MarketStore::from_path(vec![snap(0, 100.0, 0.0), snap(5, 103.0, 0.0)]).unwrap();
        let mut oracle = MarginOracle::new(PricerRegistry::default(), store);
        let mut ledger = Ledger::new("cb").unwrap();
        let cid = ContractId::new("c");
        let binding = OracleBinding {
            pricer_version: FLAT_CURVE_V1.into(),
            tick_years: 0.01,
        };
        let a = oracle.query(&mut ledger, &cid, &binding, &fwd, 0, 5).unwrap();
        let b = oracle.query(&mut ledger, &cid, &binding, &fwd, 0, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value, 3.0);
        let valuations = ledger
            .journal()
            .records()
            .unwrap()
            .into_iter()
            .filter(|r| r.kind == EventKind::Valuation)
            .count();
        assert_eq!(valuations, 1);
        assert_eq!(
            oracle.query(&mut ledger, &cid, &binding, &fwd, 0, 6),
            Err(ValuationError::MissingSnapshot(6))
        );
        let other = OracleBinding {
            pricer_version: "nope".into(),
            ..binding
        };
        assert!(matches!(
            oracle.query(&mut ledger, &ContractId::new("d"), &other, &fwd, 0, 5),
            Err(ValuationError::UnknownPricer(_))
        ));
    }

    #[test]
    fn store_requires_increasing_times() {
        let mut s = MarketStore::new();
        s.insert(snap(3, 1.0, 0.0)).unwrap();
        assert!(s.insert(snap(3, 1.0, 0.0)).is_err());
        assert!(s.insert(snap(2, 1.0, 0.0)).is_err());
    }

    #[test]
    fn margin_buffer_nearest_rank() {
        let samples: Vec<f64> = (1..=100).map(|k| if k % 2 == 0 { k as f64 } else { -(k as f64) }).collect();
        assert_eq!(margin_buffer(&samples, 0.95).unwrap(), Amount(95));
        assert_eq!(margin_buffer(&samples, 1.0).unwrap(), Amount(100));
        assert_eq!(margin_buffer(&[0.2, -3.1], 1.0).unwrap(), Amount(4));
        assert_eq!(margin_buffer(&[], 0.5), Err(ValuationError::EmptySamples));
        assert_eq!(margin_buffer(&[1.0], 0.0), Err(ValuationError::InvalidQuantile(0.0)));
        assert_eq!(margin_buffer(&[1.0], 1.5), Err(ValuationError::InvalidQuantile(1.5)));
        assert_eq!(margin_buffer(&[1.0, f64::NAN], 0.5), Err(ValuationError::NonFiniteSample(1)));
    }

    #[test]
    fn path_csv_parsing() {
        let ok = parse_path_csv("time,spot,zero_rate\n0,100,0.02\n7,101.5,0.021\n").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[1].as_of, 7);
        assert!(parse_path_csv("t,s,r\n0,1,0\n").is_err());
        assert!(parse_path_csv("time,spot,zero_rate\n0,1,0\n0,1,0\n").is_err());
        assert!(parse_path_csv("time,spot,zero_rate\n0,-1,0\n").is_err());
    }
}
