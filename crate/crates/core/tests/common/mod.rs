#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Small uniform helper independent of the library's normal stream.
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.u64() % (hi - lo)
    }

    pub fn f64(&mut self) -> f64 {
        (self.u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.f64()
    }

    pub fn coin(&mut self) -> bool {
        self.u64() & 1 == 1
    }
}

/// Brute-force cash-flow valuation at year `t` on a flat continuously
/// compounded curve `r`.
///
/// Forward: one cash flow `N (S - K)` at `T`.
/// Payer swap: each remaining period ends with floating `N (e^{rΔ} - 1)`
/// in and fixed `N τ K` out; the first remaining period starts at `t`.
pub enum OracleProduct<'a> {
    Forward { n: f64, k: f64, maturity: f64 },
    Swap { n: f64, k: f64, times: &'a [f64], accruals: &'a [f64] },
}

pub fn dcf_value(product: &OracleProduct<'_>, t: f64, spot: f64, r: f64) -> f64 {
    match *product {
        OracleProduct::Forward { n, k, maturity } => {
            let flow = n * (spot - k);
            flow / (r * (maturity - t)).exp()
        }
        OracleProduct::Swap { n, k, times, accruals } => {
            let mut pv = 0.0;
            let mut period_start = t;
            for (&pay, &tau) in times.iter().zip(accruals) {
                if pay <= t {
                    continue;
                }
                let growth = (r * (pay - period_start)).exp();
                let floating = n * (growth - 1.0);
                let fixed = n * tau * k;
                pv += (floating - fixed) / (r * (pay - t)).exp();
                period_start = pay;
            }
            pv
        }
    }
}

/// `V(t_next, new) - V(t_next, old)`.
pub fn dcf_settlement(product: &OracleProduct<'_>, t_next: f64, old: (f64, f64), new: (f64, f64)) -> f64 {
    dcf_value(product, t_next, new.0, new.1) - dcf_value(product, t_next, old.0, old.1)
}

/// Par rate by bisection on the brute-force value.
pub fn dcf_par_rate(n: f64, times: &[f64], accruals: &[f64], t: f64, r: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = dcf_value(&OracleProduct::Swap { n, k: mid, times, accruals }, t, 0.0, r);
        // Value falls as the fixed rate rises.
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Recomputes a serialized journal's chain from raw bytes:
/// `index(8) ‖ prev(32) ‖ len(4) ‖ payload ‖ hash(32)` per block.
pub fn chain_is_valid(bytes: &[u8]) -> bool {
    let mut pos = 0usize;
    let mut expected_prev = [0u8; 32];
    let mut expected_index = 0u64;
    while pos < bytes.len() {
        if bytes.len() - pos < 44 {
            return false;
        }
        let index = u64::from_be_bytes(bytes[pos..pos + 8].try_into().unwrap());
        let prev = &bytes[pos + 8..pos + 40];
        let len = u32::from_be_bytes(bytes[pos + 40..pos + 44].try_into().unwrap()) as usize;
        let body_end = pos + 44 + len;
        if bytes.len() < body_end + 32 {
            return false;
        }
        let payload = &bytes[pos + 44..body_end];
        let hash = &bytes[body_end..body_end + 32];
        let mut h = Sha256::new();
        h.update(index.to_be_bytes());
        h.update(prev);
        h.update(payload);
        let digest = h.finalize();
        if index != expected_index || prev != expected_prev || digest.as_slice() != hash {
            return false;
        }
        expected_prev.copy_from_slice(hash);
        expected_index += 1;
        pos = body_end + 32;
    }
    true
}

pub const TICK_YEARS: f64 = 1.0 / 365.0;

/// Scenario file text built from a few knobs.
pub struct ScenarioKnobs {
    pub id: String,
    pub notional: u64,
    pub settlements: usize,
    pub interval: u64,
    pub window: u64,
    pub margin: u64,
    pub fee: u64,
    pub vol: f64,
    pub drift: f64,
    pub policy_a: String,
    pub policy_b: String,
    pub funding: u64,
    pub seed: u64,
    pub swap: bool,
}

impl Default for ScenarioKnobs {
    fn default() -> Self {
        Self {
            id: "acc".into(),
            notional: 1000,
            settlements: 3,
            interval: 7,
            window: 2,
            margin: 5000,
            fee: 10_000,
            vol: 0.2,
            drift: 0.0,
            policy_a: "compliant".into(),
            policy_b: "compliant".into(),
            funding: 200_000,
            seed: 1,
            swap: false,
        }
    }
}

impl ScenarioKnobs {
    pub fn text(&self) -> String {
        let product = if self.swap {
            format!("product = swap\nfixed_rate = par\npayment_interval = {}", self.interval * 2)
        } else {
            "product = forward\nstrike = atm".to_string()
        };
        format!(
            "[contract]\nid = {}\n{product}\nnotional = {}\nsettlement_interval = {}\nsettlements = {}\n\
             prefund_window = {}\nmargin_buffer = {}\ntermination_fee = {}\n\n\
             [market]\nspot = 100\nrate = 0.02\nvolatility = {}\ndrift = {}\ntick_years = {TICK_YEARS:?}\n\n\
             [agents]\nparty_a = alice\nparty_b = bob\npolicy_a = {}\npolicy_b = {}\nfunding_a = {}\nfunding_b = {}\n\n\
             [run]\nseed = {}\n",
            self.id,
            self.notional,
            self.interval,
            self.settlements,
            self.window,
            self.margin,
            self.fee,
            self.vol,
            self.drift,
            self.policy_a,
            self.policy_b,
            self.funding,
            self.funding,
            self.seed
        )
    }

    pub fn scenario(&self) -> sdc_core::simulator::Scenario {
        sdc_core::simulator::parse_scenario(&self.text(), std::path::Path::new(".")).expect("valid scenario")
    }
}
