//! Counterparty behaviour during open windows.

use std::fmt;
use std::str::FromStr;

use crate::contract::{Party, SmartDerivative};
use crate::ledger::{Amount, Bucket, Ledger};
use crate::scheduler::{OpenWindow, WindowPolicy};
use crate::valuation::{settlement_amount, MarginOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentPolicy {
    /// Tops the margin bucket up to the requirement in every window.
    Compliant,
    /// From the 1-based cycle `at_cycle` on, pulls the whole margin bucket.
    Defaulting { at_cycle: usize },
    /// Pulls the whole margin bucket whenever the projected payment for the
    /// coming period exceeds `threshold`; otherwise compliant.
    Willful { threshold: Amount },
}

impl fmt::Display for AgentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentPolicy::Compliant => f.write_str("compliant"),
            AgentPolicy::Defaulting { at_cycle } => write!(f, "defaulting:{at_cycle}"),
            AgentPolicy::Willful { threshold } => write!(f, "willful:{threshold}"),
        }
    }
}

impl FromStr for AgentPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (name, arg) {
            ("compliant", None) => Ok(AgentPolicy::Compliant),
            ("defaulting", Some(a)) => match a.parse::<usize>() {
                Ok(at_cycle) if at_cycle >= 1 => Ok(AgentPolicy::Defaulting { at_cycle }),
                _ => Err(format!("defaulting needs a cycle number >= 1, got {a:?}")),
            },
            ("willful", Some(a)) => a
                .parse::<u64>()
                .map(|t| AgentPolicy::Willful { threshold: Amount(t) })
                .map_err(|_| format!("willful needs a non-negative threshold, got {a:?}")),
            _ => Err(format!(
                "unknown agent policy {s:?} (expected compliant, defaulting:<cycle> or willful:<threshold>)"
            )),
        }
    }
}

/// Both counterparties' policies, run in party order at every OPEN event.
pub struct Counterparties {
    pub a: AgentPolicy,
    pub b: AgentPolicy,
    /// Annual drift used by willful agents to project the next snapshot.
    pub drift: f64,
}

impl Counterparties {
    fn act(&self, side: Party, policy: AgentPolicy, w: &mut OpenWindow<'_>) {
        let one_based_cycle = w.contract.cycle() + 1;
        let pull = match policy {
            AgentPolicy::Compliant => false,
            AgentPolicy::Defaulting { at_cycle } => one_based_cycle >= at_cycle,
            AgentPolicy::Willful { threshold } => {
                projected_payment(w.contract, w.oracle, side, w.now, self.drift).is_some_and(|p| p > threshold.0 as f64)
            }
        };
        let id = w.contract.spec().party(side).clone();
        let held = w.contract.bucket(w.ledger, side, Bucket::Margin);
        // Failures are left to the margin check.
        if pull {
            if !held.is_zero() {
                let _ = w.contract.withdraw_margin(w.ledger, &id, held);
            }
        } else {
            top_up(w.ledger, w.contract, side);
        }
    }
}

fn top_up(ledger: &mut Ledger, contract: &mut SmartDerivative, side: Party) {
    let id = contract.spec().party(side).clone();
    let need = contract
        .spec()
        .margin_requirement(side)
        .saturating_sub(contract.bucket(ledger, side, Bucket::Margin));
    let free = ledger.balance_of(&id).unwrap_or(Amount::ZERO);
    let amount = need.min(free);
    if !amount.is_zero() {
        let _ = contract.deposit_margin(ledger, &id, amount);
    }
}

/// What `side` expects to pay at the end of the current period if spot
/// drifts at `drift` from today's snapshot. Negative means it expects to
/// receive. `None` if today's snapshot is not known.
pub fn projected_payment(
    contract: &SmartDerivative,
    oracle: &MarginOracle,
    side: Party,
    now: crate::Tick,
    drift: f64,
) -> Option<f64> {
    let spec = contract.spec();
    let end = *spec.settlement_times.get(contract.cycle())?;
    let today = *oracle.store().get(now).ok()?;
    let scale = spec.oracle.scale();
    let dt = scale.years(end - now);
    let mut projected = today.restamped(end);
    projected.spot = today.spot * (drift * dt).exp();
    let pricer = oracle.registry().get(&spec.oracle.pricer_version).ok()?;
    let f = settlement_amount(pricer.as_ref(), &spec.product, scale, now, end, &today, &projected).ok()?;
    Some(match side {
        Party::A => -f.value,
        Party::B => f.value,
    })
}

impl WindowPolicy for Counterparties {
    fn on_open(&mut self, window: &mut OpenWindow<'_>) {
        self.act(Party::A, self.a, window);
        self.act(Party::B, self.b, window);
    }
}
