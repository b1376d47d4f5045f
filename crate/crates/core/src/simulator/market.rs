//! Seeded market paths.
//!
//! Standard normals come from a ChaCha20 stream: each 64-bit output `x`
//! maps to the uniform `((x >> 11) + 0.5) / 2^53`, strictly inside (0, 1),
//! which is pushed through the inverse standard-normal CDF.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::scenario::MarketModel;
use crate::valuation::MarketSnapshot;
use crate::Tick;

/// Stream ids keep independent uses of one seed apart.
pub const PATH_STREAM: u64 = 0;
pub const CALIBRATION_STREAM: u64 = 1;

/// Deterministic standard-normal generator.
pub struct NormalStream {
    rng: ChaCha20Rng,
    normal: Normal,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            normal: Normal::standard(),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        let x = self.rng.next_u64();
        ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }
}

impl MarketModel {
    /// `S · exp((μ − σ²/2)Δ + σ√Δ·z)` for a step of `dt` years.
    pub fn step(&self, spot: f64, dt: f64, z: f64) -> f64 {
        let v = self.volatility;
        spot * ((self.drift - 0.5 * v * v) * dt + v * dt.sqrt() * z).exp()
    }
}

/// Snapshots at ticks `0..=ticks`, spot following geometric Brownian motion
/// and the rate held at `model.rate`.
pub fn generate_path(model: &MarketModel, seed: u64, ticks: Tick) -> Vec<MarketSnapshot> {
    let mut z = NormalStream::new(seed, PATH_STREAM);
    let mut spot = model.spot;
    let mut out = Vec::with_capacity(ticks as usize + 1);
    for tick in 0..=ticks {
        if tick > 0 {
            spot = model.step(spot, model.tick_years, z.next_normal());
        }
        out.push(MarketSnapshot {
            as_of: tick,
            spot,
            zero_rate: model.rate,
        });
    }
    out
}
