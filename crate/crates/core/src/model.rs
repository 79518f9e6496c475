//! Shared domain types: the spending sequence, stream items, regret weights
//! and the per-step decision record.
//!
//! The spending sequence is
//!
//! ```text
//!     gamma(t) = c / (t * ln(max(t, 2))^2),    c = 0.077208
//! ```
//!
//! with the natural logarithm. Its total mass is (just under) one, which is
//! what every alpha-wealth procedure in [`crate::procedures`] relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalising constant of the default spending sequence.
pub const GAMMA_CONSTANT: f64 = 0.077208;

/// Evaluates the default spending sequence at `t ≥ 1`.
///
/// `t = 0` is rejected.
pub fn gamma(t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::contract("gamma is indexed from t = 1"));
    }
    Ok(gamma_unchecked(GAMMA_CONSTANT, t))
}

#[inline]
fn gamma_unchecked(c: f64, t: u64) -> f64 {
    let l = (t.max(2) as f64).ln();
    c / (t as f64 * l * l)
}

/// A lazily grown table of spending-sequence values.
///
/// Every entry is produced by the same expression as [`gamma`], so lookups
/// are bit-identical to direct evaluation.
#[derive(Debug, Clone)]
pub struct GammaSequence {
    c: f64,
    // values[i] = gamma(i + 1)
    values: Vec<f64>,
}

impl Default for GammaSequence {
    fn default() -> Self {
        Self::new(GAMMA_CONSTANT).expect("default constant is positive")
    }
}

impl GammaSequence {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!(
                "gamma constant must be positive, got {c}"
            )));
        }
        let mut seq = Self {
            c,
            values: Vec::new(),
        };
        seq.ensure(1);
        Ok(seq)
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Grows the table so that indices `1..=n` are cached.
    pub fn ensure(&mut self, n: u64) {
        let n = n as usize;
        if self.values.len() >= n {
            return;
        }
        self.values.reserve(n - self.values.len());
        for t in self.values.len() + 1..=n {
            self.values.push(gamma_unchecked(self.c, t as u64));
        }
    }

    /// Cached lookup; falls back to direct evaluation past the cached prefix.
    #[inline]
    pub fn get(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match self.values.get((t - 1) as usize) {
            Some(v) => *v,
            None => gamma_unchecked(self.c, t),
        }
    }
}

/// Ground-truth label of a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Null,
    Alternative,
}

impl Truth {
    pub fn is_alternative(self) -> bool {
        self == Truth::Alternative
    }
}

/// One hypothesis in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamItem {
    /// 1-based position in the stream.
    pub index: u64,
    pub p_value: f64,
    pub truth: Option<Truth>,
}

impl StreamItem {
    pub fn new(index: u64, p_value: f64, truth: Option<Truth>) -> Result<Self> {
        if index == 0 {
            return Err(Error::contract("stream indices start at 1"));
        }
        if !(0.0..=1.0).contains(&p_value) {
            return Err(Error::config(format!(
                "p-value {p_value} at index {index} is outside [0, 1]"
            )));
        }
        Ok(Self {
            index,
            p_value,
            truth,
        })
    }
}

/// Penalties for a false positive (`a`) and a false negative (`b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct RegretWeights {
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    a: f64,
    b: f64,
}

impl TryFrom<RawWeights> for RegretWeights {
    type Error = Error;
    fn try_from(raw: RawWeights) -> Result<Self> {
        RegretWeights::new(raw.a, raw.b)
    }
}

impl From<RegretWeights> for RawWeights {
    fn from(w: RegretWeights) -> Self {
        RawWeights { a: w.a, b: w.b }
    }
}

impl Default for RegretWeights {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl RegretWeights {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::config(format!(
                "regret weights must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Normalised false-positive weight `a / (a + b)`, strictly inside (0, 1).
    pub fn w(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn ratio(&self) -> f64 {
        self.b / self.a
    }
}

/// Weighted regret `a·V + b·M`.
pub fn weighted_regret(w: &RegretWeights, false_positives: u64, false_negatives: u64) -> f64 {
    w.a * false_positives as f64 + w.b * false_negatives as f64
}

/// Per-step trace of a (possibly wrapped) procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: u64,
    pub lambda_base: f64,
    pub xi: f64,
    pub lambda_actual: f64,
    pub delta_base: bool,
    pub delta_actual: bool,
}

impl DecisionRecord {
    /// Checks the clipping identity, and subsumption when the perturbation
    /// is known to be nonnegative.
    pub fn check(&self, nonnegative_perturbation: bool) -> Result<()> {
        if self.lambda_actual != (self.lambda_base + self.xi).min(1.0) {
            return Err(Error::contract(format!(
                "t={}: lambda_actual {} != min(1, {} + {})",
                self.t, self.lambda_actual, self.lambda_base, self.xi
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda_base) || !(0.0..=1.0).contains(&self.lambda_actual) {
            return Err(Error::contract(format!(
                "t={}: thresholds out of [0, 1]",
                self.t
            )));
        }
        if nonnegative_perturbation {
            if self.xi < 0.0 {
                return Err(Error::contract(format!("t={}: negative xi", self.t)));
            }
            if self.delta_base && !self.delta_actual {
                return Err(Error::contract(format!(
                    "t={}: base rejection not subsumed by actual decision",
                    self.t
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Frozen from a 40-digit mpmath evaluation of 0.077208 / (t * ln(max(t,2))^2).
    const GAMMA_1: f64 = 0.160_698_336_285_480_97;
    const GAMMA_2: f64 = 0.080_349_168_142_740_48;

    #[test]
    fn gamma_matches_high_precision_values() {
        assert_abs_diff_eq!(gamma(1).unwrap(), GAMMA_1, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma(2).unwrap(), GAMMA_2, epsilon = 1e-12);
        assert_abs_diff_eq!(gamma(2).unwrap(), gamma(1).unwrap() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gamma_rejects_zero() {
        assert!(gamma(0).is_err());
    }

    #[test]
    fn gamma_partial_sums_stay_below_one() {
        let mut seq = GammaSequence::default();
        seq.ensure(1_000_000);
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for t in 1..=1_000_000u64 {
            let g = seq.get(t);
            assert!(g > 0.0);
            if t >= 2 {
                assert!(g < prev, "not decreasing at t={t}");
            }
            prev = g;
            let next = sum + g;
            assert!(next > sum);
            sum = next;
        }
        assert!(sum < 1.0, "partial sum {sum}");
    }

    #[test]
    fn table_lookup_is_bit_identical() {
        let mut seq = GammaSequence::default();
        seq.ensure(500);
        for t in 1..=1000 {
            assert_eq!(seq.get(t).to_bits(), gamma(t).unwrap().to_bits());
        }
    }

    #[test]
    fn weighted_regret_examples() {
        let unit = RegretWeights::new(1.0, 1.0).unwrap();
        assert_eq!(weighted_regret(&unit, 3, 7), 10.0);
        assert_eq!(weighted_regret(&unit, 0, 0), 0.0);
        let skew = RegretWeights::new(2.0, 10.0).unwrap();
        assert_eq!(weighted_regret(&skew, 5, 1), 20.0);
    }

    #[test]
    fn weights_reject_degenerate_values() {
        assert!(RegretWeights::new(0.0, 1.0).is_err());
        assert!(RegretWeights::new(1.0, 0.0).is_err());
        assert!(RegretWeights::new(-1.0, 1.0).is_err());
        assert!(RegretWeights::new(f64::NAN, 1.0).is_err());
        let w = RegretWeights::new(1.0, 3.0).unwrap();
        assert_eq!(w.w(), 0.25);
        let json = serde_json::to_string(&w).unwrap();
        assert!(serde_json::from_str::<RegretWeights>(r#"{"a":0.0,"b":1.0}"#).is_err());
        assert_eq!(serde_json::from_str::<RegretWeights>(&json).unwrap(), w);
    }

    #[test]
    fn stream_item_validates_range() {
        assert!(StreamItem::new(1, 1.5, None).is_err());
        assert!(StreamItem::new(1, -0.1, None).is_err());
        assert!(StreamItem::new(0, 0.5, None).is_err());
        assert!(StreamItem::new(3, 0.0, Some(Truth::Null)).is_ok());
    }

    #[test]
    fn record_check() {
        let ok = DecisionRecord {
            t: 1,
            lambda_base: 0.99,
            xi: 0.05,
            lambda_actual: 1.0,
            delta_base: true,
            delta_actual: true,
        };
        assert!(ok.check(true).is_ok());
        let broken = DecisionRecord {
            delta_actual: false,
            ..ok
        };
        assert!(broken.check(true).is_err());
        assert!(broken.check(false).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn regret_is_linear_in_each_count(
            a in 0.01f64..100.0, b in 0.01f64..100.0,
            v1 in 0u64..10_000, v2 in 0u64..10_000, m in 0u64..10_000,
        ) {
            let w = RegretWeights::new(a, b).unwrap();
            let lhs = weighted_regret(&w, v1 + v2, m);
            let rhs = weighted_regret(&w, v1, m) + weighted_regret(&w, v2, m) - weighted_regret(&w, 0, m);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
            let lhs = weighted_regret(&w, m, v1 + v2);
            let rhs = weighted_regret(&w, m, v1) + weighted_regret(&w, m, v2) - weighted_regret(&w, m, 0);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        }
    }
}
