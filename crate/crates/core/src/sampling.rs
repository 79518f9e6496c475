//! Seeded random number generation and the distribution samplers used by the
//! environments and the exploration wrappers.
//!
//! Every replication owns an [`RngState`] keyed by `derive(base_seed, r)`.
//! The generator is ChaCha8, a counter-based design: sub-streams are obtained
//! by switching the stream id, so replications and their components never
//! share state and results do not depend on execution order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Well-known sub-stream ids inside one replication.
pub mod streams {
    /// p-values and labels.
    pub const ENVIRONMENT: u64 = 0;
    /// Perturbation draws of the wrapper.
    pub const WRAPPER: u64 = 1;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the seed of replication `r` from a base seed.
///
/// For a fixed base seed the map is injective in `r`: `r ↦ s + (r+1)·φ` is a
/// bijection of `u64` for odd `φ`, and the finaliser is a bijection as well.
pub fn derive_seed(base: u64, replication: u64) -> u64 {
    let mut z = base.wrapping_add(replication.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator state owned by exactly one consumer.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// State for replication `r` of a run with base seed `base`.
    pub fn for_replication(base: u64, r: u64) -> Self {
        Self::new(derive_seed(base, r))
    }

    /// A fresh, independent sub-stream under the same key.
    pub fn substream(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `(0, 1]`, safe to take the logarithm of.
    #[inline]
    pub fn uniform_open_low(&mut self) -> f64 {
        1.0 - self.uniform01()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Natural log of a Gamma(shape, 1) variate.
///
/// Marsaglia–Tsang squeeze/rejection for shape ≥ 1. For shape < 1 the
/// boost `G(shape) = G(shape + 1) · U^(1/shape)` is applied in log space so
/// that tiny shapes (0.05 and below) never underflow to zero.
pub fn ln_gamma_variate(shape: f64, rng: &mut RngState) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boost = rng.uniform_open_low().ln() / shape;
        return ln_gamma_variate(shape + 1.0, rng) + boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform_open_low();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// Draws a Beta(a, b) variate as `X / (X + Y)` from two gamma variates.
pub fn beta_variate(a: f64, b: f64, rng: &mut RngState) -> f64 {
    let lx = ln_gamma_variate(a, rng);
    let ly = ln_gamma_variate(b, rng);
    // X / (X + Y) = 1 / (1 + exp(ln Y - ln X))
    let p = 1.0 / (1.0 + (ly - lx).exp());
    p.clamp(0.0, 1.0)
}

/// Distribution of alternative p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AltDistribution {
    Beta {
        a: f64,
        b: f64,
    },
    /// CDF `G(x) = min(1, slope·x)`: Lipschitz constant and detectability both
    /// equal `slope`.
    LinearDetectability {
        slope: f64,
    },
}

impl AltDistribution {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        let d = AltDistribution::Beta { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn linear(slope: f64) -> Result<Self> {
        let d = AltDistribution::LinearDetectability { slope };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AltDistribution::Beta { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                    return Err(Error::config(format!(
                        "beta shapes must be positive, got ({a}, {b})"
                    )));
                }
            }
            AltDistribution::LinearDetectability { slope } => {
                if !(slope.is_finite() && slope >= 1.0) {
                    return Err(Error::config(format!(
                        "linear-detectability slope must be >= 1, got {slope}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Analytic mean of the p-value.
    pub fn mean(&self) -> f64 {
        match *self {
            AltDistribution::Beta { a, b } => a / (a + b),
            AltDistribution::LinearDetectability { slope } => 0.5 / slope,
        }
    }

    /// Closed-form CDF, when there is one.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match *self {
            AltDistribution::LinearDetectability { slope } => Some((slope * x).clamp(0.0, 1.0)),
            AltDistribution::Beta { .. } => None,
        }
    }

    /// Lipschitz constant `L` of the CDF, when finite and known.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            AltDistribution::LinearDetectability { slope } => Some(slope),
            AltDistribution::Beta { .. } => None,
        }
    }

    /// `L · alpha < 1`: even the full wealth cannot make a discovery likely.
    pub fn is_weak_signal(&self, alpha: f64) -> bool {
        self.lipschitz().is_some_and(|l| l * alpha < 1.0)
    }

    pub fn sample(&self, rng: &mut RngState) -> f64 {
        match *self {
            AltDistribution::Beta { a, b } => beta_variate(a, b, rng),
            AltDistribution::LinearDetectability { slope } => rng.uniform01() / slope,
        }
    }
}
