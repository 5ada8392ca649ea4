//! Seeded synthetic price-like series: piecewise trends, sinusoidal
//! seasonalities, exponentially decaying jumps and Gaussian noise.

use std::f64::consts::PI;

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{PanelError, PricePanel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("all channels must have the same length ({expected} vs {got})")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendSegment {
    pub length: usize,
    /// EUR/MWh per hour.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seasonal {
    pub period: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    /// Expected jumps per hour.
    pub rate: f64,
    pub magnitude_mean: f64,
    pub magnitude_std: f64,
    pub half_life: f64,
}

impl Default for JumpSpec {
    fn default() -> Self {
        Self { rate: 0.0, magnitude_mean: 0.0, magnitude_std: 0.0, half_life: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Channel identifier used by [`generate_panel`].
    #[serde(default)]
    pub name: Option<String>,
    pub n_hours: usize,
    pub base_level: f64,
    #[serde(default)]
    pub trend_segments: Vec<TrendSegment>,
    #[serde(default)]
    pub seasonals: Vec<Seasonal>,
    #[serde(default)]
    pub jumps: JumpSpec,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn flat(n_hours: usize, base_level: f64) -> Self {
        Self {
            name: None,
            n_hours,
            base_level,
            trend_segments: Vec::new(),
            seasonals: Vec::new(),
            jumps: JumpSpec::default(),
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.n_hours == 0 {
            return bad("n_hours must be at least 1");
        }
        if !self.base_level.is_finite() {
            return bad("base_level must be finite");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and non-negative");
        }
        for s in &self.seasonals {
            if !(s.period >= 2.0) || !s.amplitude.is_finite() || !s.phase.is_finite() {
                return bad("seasonal periods must be >= 2 with finite amplitude and phase");
            }
        }
        for t in &self.trend_segments {
            if t.length == 0 || !t.slope.is_finite() {
                return bad("trend segments need positive length and finite slope");
            }
        }
        let j = &self.jumps;
        if !(j.rate >= 0.0 && j.rate.is_finite()) {
            return bad("jump rate must be finite and non-negative");
        }
        if j.rate > 0.0 && !(j.half_life > 0.0 && j.magnitude_std >= 0.0 && j.magnitude_mean.is_finite()) {
            return bad("jumps need positive half-life and non-negative magnitude std");
        }
        Ok(())
    }

    /// Slope in effect during hour `t`; segments repeat when shorter than the series.
    fn slope_at(&self, t: usize) -> f64 {
        let cycle: usize = self.trend_segments.iter().map(|s| s.length).sum();
        if cycle == 0 {
            return 0.0;
        }
        let mut pos = t % cycle;
        for seg in &self.trend_segments {
            if pos < seg.length {
                return seg.slope;
            }
            pos -= seg.length;
        }
        unreachable!("position within cycle")
    }
}

/// One channel of `spec.n_hours` values.
///
/// `value(t) = base + trend(t) + sum_k A_k sin(2 pi t / P_k + phi_k) + jumps(t) + noise(t)`,
/// where `trend(0) = 0` and `trend(t + 1) = trend(t) + slope(t)`.
pub fn generate_series(spec: &SynthSpec) -> Result<Vec<f64>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("valid std"));
    let jumps = &spec.jumps;
    let arrivals = (jumps.rate > 0.0).then(|| Poisson::new(jumps.rate).expect("positive rate"));
    let magnitude = (jumps.rate > 0.0)
        .then(|| Normal::new(jumps.magnitude_mean, jumps.magnitude_std).expect("valid magnitude"));
    let decay = if jumps.rate > 0.0 { 0.5f64.powf(1.0 / jumps.half_life) } else { 0.0 };

    let mut out = Vec::with_capacity(spec.n_hours);
    let mut trend = 0.0;
    let mut jump_level = 0.0;
    for t in 0..spec.n_hours {
        let tf = t as f64;
        let seasonal: f64 = spec
            .seasonals
            .iter()
            .map(|s| s.amplitude * (2.0 * PI * tf / s.period + s.phase).sin())
            .sum();
        if let (Some(arr), Some(mag)) = (&arrivals, &magnitude) {
            jump_level *= decay;
            let k: f64 = arr.sample(&mut rng);
            for _ in 0..k as u64 {
                jump_level += mag.sample(&mut rng);
            }
        }
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        out.push(spec.base_level + trend + seasonal + jump_level + eps);
        trend += spec.slope_at(t);
    }
    Ok(out)
}

/// Default start instant for synthetic panels.
pub fn synthetic_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap()
}

/// Builds a panel with one channel per spec, in the given order. Unnamed
/// channels are called `S0`, `S1`, ...
pub fn generate_panel(specs: &[SynthSpec]) -> Result<PricePanel, SynthError> {
    let first = specs.first().ok_or_else(|| SynthError::Invalid("no channel specs".into()))?;
    let n = first.n_hours;
    let mut columns = Vec::with_capacity(specs.len());
    for s in specs {
        if s.n_hours != n {
            return Err(SynthError::LengthMismatch { expected: n, got: s.n_hours });
        }
        columns.push(generate_series(s)?);
    }
    let mut values = Vec::with_capacity(n * specs.len());
    for t in 0..n {
        values.extend(columns.iter().map(|c| c[t]));
    }
    let names = specs
        .iter()
        .enumerate()
        .map(|(i, s)| s.name.clone().unwrap_or_else(|| format!("S{i}")))
        .collect();
    Ok(PricePanel::new(synthetic_epoch(), names, values, "synthetic")?)
}

/// Random seeds for a family of channels derived from one master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}
