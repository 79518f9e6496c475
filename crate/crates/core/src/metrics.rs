//! Running confusion counters, derived rates, and trajectory rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{weighted_regret, RegretWeights, Truth};

/// Running counts for one decision path.
///
/// `v + s == r` and `s + m == n_alt` after every update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounters {
    /// False positives.
    pub v: u64,
    /// True positives.
    pub s: u64,
    /// False negatives.
    pub m: u64,
    /// Total rejections.
    pub r: u64,
    pub n_alt: u64,
    pub t: u64,
}

impl ConfusionCounters {
    pub fn update(&mut self, truth: Option<Truth>, rejected: bool) -> Result<()> {
        let truth = truth.ok_or_else(|| {
            Error::contract(format!(
                "step {} has no truth label; metrics need labelled streams",
                self.t + 1
            ))
        })?;
        self.t += 1;
        if rejected {
            self.r += 1;
        }
        match (truth, rejected) {
            (Truth::Null, true) => self.v += 1,
            (Truth::Null, false) => {}
            (Truth::Alternative, true) => {
                self.n_alt += 1;
                self.s += 1;
            }
            (Truth::Alternative, false) => {
                self.n_alt += 1;
                self.m += 1;
            }
        }
        Ok(())
    }

    /// False discovery proportion `V / max(1, R)`.
    pub fn fdp(&self) -> f64 {
        self.v as f64 / self.r.max(1) as f64
    }

    /// `S / max(1, #alternatives)`.
    pub fn power(&self) -> f64 {
        self.s as f64 / self.n_alt.max(1) as f64
    }

    pub fn regret(&self, w: &RegretWeights) -> f64 {
        weighted_regret(w, self.v, self.m)
    }
}

/// Exploration dividend `S_actual - S_base` of two paths over one stream.
pub fn dividend(base: &ConfusionCounters, actual: &ConfusionCounters) -> Result<i64> {
    if base.t != actual.t || base.n_alt != actual.n_alt {
        return Err(Error::contract(format!(
            "paired counters come from different streams (t {} vs {}, alternatives {} vs {})",
            base.t, actual.t, base.n_alt, actual.n_alt
        )));
    }
    Ok(actual.s as i64 - base.s as i64)
}

/// One persisted trajectory row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub fdp: f64,
    pub power: f64,
    pub regret: f64,
    pub v: u64,
    pub s: u64,
    pub m: u64,
    pub r: u64,
    pub lambda_base: f64,
    pub lambda_actual: f64,
    pub dividend: i64,
}

impl TrajectoryPoint {
    pub fn from_counters(
        c: &ConfusionCounters,
        w: &RegretWeights,
        lambda_base: f64,
        lambda_actual: f64,
        dividend: i64,
    ) -> Self {
        Self {
            t: c.t,
            fdp: c.fdp(),
            power: c.power(),
            regret: c.regret(w),
            v: c.v,
            s: c.s,
            m: c.m,
            r: c.r,
            lambda_base,
            lambda_actual,
            dividend,
        }
    }
}

/// A trajectory row as written to CSV. Field order is the file's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct TrajectoryRow {
    pub run_id: u64,
    pub t: u64,
    pub procedure: String,
    pub wrapper: String,
    #[serde(rename = "V")]
    pub v: u64,
    #[serde(rename = "S")]
    pub s: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "R")]
    pub r: u64,
    pub fdp: f64,
    pub power: f64,
    pub regret: f64,
    pub lambda_base: f64,
    pub lambda_actual: f64,
    pub dividend: i64,
}

pub const TRAJECTORY_COLUMNS: [&str; 14] = [
    "run_id",
    "t",
    "procedure",
    "wrapper",
    "V",
    "S",
    "M",
    "R",
    "fdp",
    "power",
    "regret",
    "lambda_base",
    "lambda_actual",
    "dividend",
];

impl TrajectoryRow {
    pub fn new(run_id: u64, procedure: &str, wrapper: &str, p: &TrajectoryPoint) -> Self {
        Self {
            run_id,
            t: p.t,
            procedure: procedure.to_owned(),
            wrapper: wrapper.to_owned(),
            v: p.v,
            s: p.s,
            m: p.m,
            r: p.r,
            fdp: p.fdp,
            power: p.power,
            regret: p.regret,
            lambda_base: p.lambda_base,
            lambda_actual: p.lambda_actual,
            dividend: p.dividend,
        }
    }
}

/// Mean and standard error of a Monte-Carlo quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Zero when only one sample is available.
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    /// Two-pass estimate over per-path values, accumulated in slice order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se,
            n: n as u64,
        }
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.se
    }

    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.se
    }
}
