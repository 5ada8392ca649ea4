//! Sample autocorrelation and partial autocorrelation (Durbin–Levinson).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("max_lag {max_lag} needs more than {} observations, got {n}", max_lag + 1)]
    MaxLagTooLarge { max_lag: usize, n: usize },
    #[error("series contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfResult {
    /// Lags `0..=max_lag`; `acf[0] == 1`.
    pub acf: Vec<f64>,
    /// Lags `1..=max_lag`, so `pacf[k - 1]` is the partial autocorrelation at lag `k`.
    pub pacf: Vec<f64>,
    /// Half-width of the 95% band, `1.96 / sqrt(n)`.
    pub band: f64,
    pub n: usize,
}

impl PacfResult {
    pub fn max_lag(&self) -> usize {
        self.pacf.len()
    }

    /// Partial autocorrelation at lag `k >= 1`.
    pub fn at(&self, k: usize) -> f64 {
        self.pacf[k - 1]
    }

    /// Largest lag whose partial autocorrelation lies outside the band.
    pub fn last_significant_lag(&self) -> Option<usize> {
        (1..=self.max_lag()).rev().find(|&k| self.at(k).abs() > self.band)
    }
}

fn check(series: &[f64], max_lag: usize) -> Result<(), StatsError> {
    if series.len() <= max_lag + 1 {
        return Err(StatsError::MaxLagTooLarge { max_lag, n: series.len() });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Biased (1/n) sample autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, StatsError> {
    check(series, max_lag)?;
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / n;
    if !(c0 > f64::EPSILON * mean.abs().max(1.0).powi(2)) {
        return Err(StatsError::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let ck = centered.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / n;
            ck / c0
        })
        .collect())
}

/// Durbin–Levinson recursion. Returns the partial autocorrelations for lags
/// `1..=max_lag` and the final-order AR coefficients.
pub fn durbin_levinson(acf: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let max_lag = acf.len().saturating_sub(1);
    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = acf.first().copied().unwrap_or(1.0);
    for k in 1..=max_lag {
        let num = acf[k] - phi.iter().enumerate().map(|(j, p)| p * acf[k - 1 - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - a * prev[prev.len() - 1 - j];
        }
        phi.push(a);
        pacf.push(a);
        v *= 1.0 - a * a;
    }
    (pacf, phi)
}

pub fn pacf(series: &[f64], max_lag: usize) -> Result<PacfResult, StatsError> {
    let acf = autocorrelation(series, max_lag)?;
    let (pacf, _) = durbin_levinson(&acf);
    let n = series.len();
    Ok(PacfResult { acf, pacf, band: 1.96 / (n as f64).sqrt(), n })
}

/// Yule–Walker AR(`order`) coefficients and innovation variance.
pub fn yule_walker(series: &[f64], order: usize) -> Result<(Vec<f64>, f64), StatsError> {
    let acf = autocorrelation(series, order)?;
    let (pacf, phi) = durbin_levinson(&acf);
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c0 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sigma2 = pacf.iter().fold(c0, |v, a| v * (1.0 - a * a));
    Ok((phi, sigma2))
}
