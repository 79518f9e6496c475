//! Closed-form calculators for the bounds and constants used to check
//! simulation output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the bursty signal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstyParams {
    /// Null proportion after the burst onset.
    pub pi: f64,
    /// Detectability slope of the alternative CDF near zero.
    pub mu: f64,
    /// Burst delay ratio `T0 / T`.
    pub rho: f64,
}

impl BurstyParams {
    pub fn new(pi: f64, mu: f64, rho: f64) -> Result<Self> {
        let p = Self { pi, mu, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::config(format!(
                "pi must lie in (0, 1), got {}",
                self.pi
            )));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!(
                "rho must lie in [0, 1) (the tax diverges at 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Critical weight ratio `M*(rho)` above which exploration lowers regret:
///
/// ```text
///   M*(rho) = pi / (mu (1 - pi))  +  (1 / (mu (1 - pi))) · sqrt(rho) / (1 - sqrt(rho))
/// ```
///
/// The first term is the stationary difficulty, the second the cold-start tax.
pub fn cold_start_tax(p: &BurstyParams) -> Result<f64> {
    p.validate()?;
    let denom = p.mu * (1.0 - p.pi);
    let sr = p.rho.sqrt();
    Ok(p.pi / denom + (sr / (1.0 - sr)) / denom)
}

/// `(C1, C2)` with `C1 = (1 - pi) mu (1 - sqrt(rho))` and
/// `C2 = sqrt(rho) + pi (1 - sqrt(rho))`; `C2 / C1 = M*(rho)`.
pub fn critical_constants(p: &BurstyParams) -> Result<(f64, f64)> {
    p.validate()?;
    let sr = p.rho.sqrt();
    Ok(((1.0 - p.pi) * p.mu * (1.0 - sr), sr + p.pi * (1.0 - sr)))
}

/// Additive high-probability FDP inflation term at time `t`:
/// `(kappa alpha sqrt(t) + sqrt((t/2) ln(1/delta))) / max(1, R)`.
pub fn fdp_inflation_term(
    t: u64,
    kappa: f64,
    alpha: f64,
    delta: f64,
    rejections: u64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if t == 0 {
        return Err(Error::config("t must be >= 1"));
    }
    let tf = t as f64;
    let exploration = kappa * alpha * tf.sqrt();
    let concentration = (tf / 2.0 * (1.0 / delta).ln()).sqrt();
    Ok((exploration + concentration) / rejections.max(1) as f64)
}

/// Regret-gap bound `a · kappa · alpha · sqrt(T)`.
pub fn regret_gap_bound(horizon: u64, a: f64, kappa: f64, alpha: f64) -> f64 {
    a * kappa * alpha * (horizon as f64).sqrt()
}

/// Expected threshold ratio in a drought:
/// `1 + (kappa alpha / (2 sqrt(t))) / lambda_base`.
pub fn drought_threshold_ratio(lambda_base: f64, t: u64, kappa: f64, alpha: f64) -> Result<f64> {
    if lambda_base.is_nan() || lambda_base <= 0.0 {
        return Err(Error::config(format!(
            "lambda_base must be positive, got {lambda_base}"
        )));
    }
    if t == 0 {
        return Err(Error::config("t must be >= 1"));
    }
    let mean_xi = kappa * alpha / (2.0 * (t as f64).sqrt());
    Ok(1.0 + mean_xi / lambda_base)
}

/// Integral bound on cumulative extra false positives: `kappa alpha sqrt(T)`.
pub fn extra_fp_budget(horizon: u64, kappa: f64, alpha: f64) -> f64 {
    kappa * alpha * (horizon as f64).sqrt()
}
