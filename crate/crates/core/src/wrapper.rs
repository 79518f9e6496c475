//! The decoupled exploration wrapper and its ablation variants.
//!
//! At step `t` the wrapper asks the base procedure for its level
//! `lambda_base`, draws a perturbation `xi`, and acts on
//! `lambda = min(1, lambda_base + xi)`. What differs between variants is the
//! law of `xi` and which decision is fed back into the base state:
//!
//! | variant       | `xi`                                   | base updated with |
//! |---------------|----------------------------------------|-------------------|
//! | `domt`        | `eps_t · U`, `U ~ Uniform[0, 1)`       | virtual decision  |
//! | `det_offset`  | `eps_t / 2`                            | virtual decision  |
//! | `cr`          | `N(0, sigma_t^2)` truncated to keep `lambda` in `[0, 1]` | actual decision |
//! | `none`        | `0`                                    | virtual decision  |
//!
//! with amplitude `eps_t = kappa · alpha / sqrt(t)` and
//! `sigma_t = CR_SCALE · eps_t / 2`.
//!
//! Only the virtual decision `1{p <= lambda_base}` ever reaches the base
//! state for the decoupled variants, so their `lambda_base` sequence is
//! bit-identical to a bare run of the base procedure on the same stream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionRecord, StreamItem};
use crate::procedures::Procedure;
use crate::sampling::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapperKind {
    None,
    Domt,
    /// Coupled randomization: symmetric noise, actual decisions fed back.
    Cr,
    DetOffset,
}

impl WrapperKind {
    pub const ALL: [WrapperKind; 4] = [
        WrapperKind::None,
        WrapperKind::Domt,
        WrapperKind::Cr,
        WrapperKind::DetOffset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WrapperKind::None => "none",
            WrapperKind::Domt => "domt",
            WrapperKind::Cr => "cr",
            WrapperKind::DetOffset => "det_offset",
        }
    }

    /// Variants whose perturbation is never negative (subsumption holds).
    pub fn is_nonnegative(self) -> bool {
        !matches!(self, WrapperKind::Cr)
    }

    /// Variants that feed only virtual decisions back into the base state.
    pub fn is_decoupled(self) -> bool {
        !matches!(self, WrapperKind::Cr)
    }
}

impl std::fmt::Display for WrapperKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for WrapperKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        WrapperKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown wrapper {s:?} (expected none, domt, cr or det_offset)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomtConfig {
    pub kappa: f64,
    pub alpha: f64,
    pub variant: WrapperKind,
}

impl DomtConfig {
    pub fn new(variant: WrapperKind, kappa: f64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            kappa,
            alpha,
            variant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::config(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Ratio of the coupled variant's noise scale to `eps_t / 2`.
///
/// A normal truncated near zero is close to half-normal, whose mean magnitude
/// is `sigma · sqrt(2/pi)`; this factor makes that magnitude equal to `eps_t / 2`,
/// the mean of the uniform perturbation.
pub const CR_SCALE: f64 = 1.253_314_137_315_500_3;

/// Exploration amplitude `kappa · alpha / sqrt(t)`.
pub fn exploration_amplitude(t: u64, cfg: &DomtConfig) -> f64 {
    debug_assert!(t >= 1);
    if cfg.variant == WrapperKind::None {
        return 0.0;
    }
    cfg.kappa * cfg.alpha / (t as f64).sqrt()
}

/// A base procedure plus its exploration layer, for one replication.
#[derive(Debug, Clone)]
pub struct Wrapper {
    cfg: DomtConfig,
    base: Procedure,
    rng: RngState,
    t: u64,
}

impl Wrapper {
    pub fn new(cfg: DomtConfig, base: Procedure, rng: RngState) -> Result<Self> {
        cfg.validate()?;
        if base.steps() != 0 {
            return Err(Error::contract("wrapper needs a fresh base procedure"));
        }
        if cfg.alpha != base.alpha() {
            return Err(Error::config(format!(
                "wrapper alpha {} differs from procedure alpha {}",
                cfg.alpha,
                base.alpha()
            )));
        }
        Ok(Self {
            cfg,
            base,
            rng,
            t: 0,
        })
    }

    pub fn config(&self) -> &DomtConfig {
        &self.cfg
    }

    pub fn base(&self) -> &Procedure {
        &self.base
    }

    /// Steps processed so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    fn draw_perturbation(&mut self, t: u64, lambda_base: f64) -> f64 {
        let eps = exploration_amplitude(t, &self.cfg);
        if eps == 0.0 {
            return 0.0;
        }
        match self.cfg.variant {
            WrapperKind::None => 0.0,
            WrapperKind::Domt => eps * self.rng.uniform01(),
            WrapperKind::DetOffset => eps / 2.0,
            WrapperKind::Cr => {
                let sigma = eps / 2.0 * CR_SCALE;
                let (lo, hi) = (-lambda_base, 1.0 - lambda_base);
                // the window always contains 0, so acceptance is at least 1/2
                loop {
                    let xi = sigma * self.rng.standard_normal();
                    if (lo..=hi).contains(&xi) {
                        return xi;
                    }
                }
            }
        }
    }

    /// Processes one stream item.
    pub fn step(&mut self, item: &StreamItem) -> Result<DecisionRecord> {
        let t = self.t + 1;
        if item.index != t {
            return Err(Error::contract(format!(
                "expected stream index {t}, got {}",
                item.index
            )));
        }
        let p = item.p_value;
        let lambda_base = self.base.threshold();
        let xi = self.draw_perturbation(t, lambda_base);
        let lambda_actual = (lambda_base + xi).min(1.0);
        let delta_base = self.base.rejects(lambda_base, p);
        let delta_actual = self.base.rejects(lambda_actual, p);
        let flags = self.base.flags(p);
        let fed_back = if self.cfg.variant.is_decoupled() {
            delta_base
        } else {
            delta_actual
        };
        self.base.update(fed_back, flags);
        self.t = t;
        Ok(DecisionRecord {
            t,
            lambda_base,
            xi,
            lambda_actual,
            delta_base,
            delta_actual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedures::{ProcedureKind, ProcedureSpec};
    use crate::sampling::AltDistribution;

    fn wrapper(variant: WrapperKind, kappa: f64, kind: ProcedureKind, seed: u64) -> Wrapper {
        let cfg = DomtConfig::new(variant, kappa, 0.05).unwrap();
        let base = ProcedureSpec::new(kind, 0.05).build().unwrap();
        Wrapper::new(cfg, base, RngState::new(seed)).unwrap()
    }

    fn stream(seed: u64, n: u64, pi0: f64) -> Vec<StreamItem> {
        let mut rng = RngState::new(seed);
        let alt = AltDistribution::beta(0.05, 20.0).unwrap();
        (1..=n)
            .map(|t| {
                let p = if rng.bernoulli(pi0) {
                    rng.uniform01()
                } else {
                    alt.sample(&mut rng)
                };
                StreamItem::new(t, p, None).unwrap()
            })
            .collect()
    }

    #[test]
    fn amplitude_examples() {
        let cfg = DomtConfig::new(WrapperKind::Domt, 3.0, 0.05).unwrap();
        assert!((exploration_amplitude(4, &cfg) - 0.075).abs() < 1e-15);
        let zero = DomtConfig::new(WrapperKind::Domt, 0.0, 0.05).unwrap();
        for t in 1..100 {
            assert_eq!(exploration_amplitude(t, &zero), 0.0);
            assert!(exploration_amplitude(t + 1, &cfg) < exploration_amplitude(t, &cfg));
        }
    }

    #[test]
    fn config_validation() {
        assert!(DomtConfig::new(WrapperKind::Domt, -1.0, 0.05).is_err());
        assert!(DomtConfig::new(WrapperKind::Domt, 1.0, 1.0).is_err());
        let cfg = DomtConfig::new(WrapperKind::Domt, 1.0, 0.1).unwrap();
        let base = ProcedureSpec::new(ProcedureKind::Lond, 0.05)
            .build()
            .unwrap();
        assert!(Wrapper::new(cfg, base, RngState::new(0)).is_err());
        assert_eq!(
            "det_offset".parse::<WrapperKind>().unwrap(),
            WrapperKind::DetOffset
        );
        assert!("ucb".parse::<WrapperKind>().is_err());
    }

    #[test]
    fn out_of_order_item_rejected() {
        let mut w = wrapper(WrapperKind::Domt, 3.0, ProcedureKind::Lond, 1);
        let item = StreamItem::new(2, 0.5, None).unwrap();
        assert!(w.step(&item).is_err());
    }

    #[test]
    fn indicator_definitions() {
        // lambda_base = 0.01, xi = 0.02, p = 0.025
        let lambda_base: f64 = 0.01;
        let xi = 0.02;
        let lambda = (lambda_base + xi).min(1.0);
        let base = ProcedureSpec::new(ProcedureKind::Lond, 0.05)
            .build()
            .unwrap();
        assert!(!base.rejects(lambda_base, 0.025));
        assert!(base.rejects(lambda, 0.025));
        let clipped = (0.99f64 + 0.05).min(1.0);
        assert_eq!(clipped, 1.0);
    }

    #[test]
    fn deterministic_offset_is_half_amplitude() {
        let mut w = wrapper(WrapperKind::DetOffset, 3.0, ProcedureKind::Lond, 1);
        let items = stream(3, 4, 1.0);
        let mut last = None;
        for item in &items {
            last = Some(w.step(item).unwrap());
        }
        assert!((last.unwrap().xi - 0.0375).abs() < 1e-15);
    }

    #[test]
    fn deterministic_offset_ignores_seed() {
        let items = stream(8, 3000, 0.8);
        let mut a = wrapper(WrapperKind::DetOffset, 3.0, ProcedureKind::Saffron, 1);
        let mut b = wrapper(WrapperKind::DetOffset, 3.0, ProcedureKind::Saffron, 2);
        for item in &items {
            assert_eq!(a.step(item).unwrap(), b.step(item).unwrap());
        }
    }

    #[test]
    fn zero_kappa_is_identity() {
        let items = stream(4, 10_000, 0.8);
        let mut w = wrapper(WrapperKind::Domt, 0.0, ProcedureKind::Lord, 5);
        for item in &items {
            let rec = w.step(item).unwrap();
            assert_eq!(rec.xi, 0.0);
            assert_eq!(rec.delta_base, rec.delta_actual);
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        for variant in [WrapperKind::Domt, WrapperKind::DetOffset, WrapperKind::None] {
            for kind in ProcedureKind::ALL {
                let items = stream(6, 2000, 0.8);
                let mut w = wrapper(variant, 8.0, kind, 7);
                for item in &items {
                    let rec = w.step(item).unwrap();
                    rec.check(true).unwrap();
                    let eps = exploration_amplitude(rec.t, w.config());
                    assert!(rec.xi >= 0.0 && rec.xi <= eps);
                }
            }
        }
    }

    #[test]
    fn domt_mean_perturbation_is_half_amplitude() {
        let mut w = wrapper(WrapperKind::Domt, 3.0, ProcedureKind::Lond, 21);
        let n = 200_000u64;
        let mut ratio_sum = 0.0;
        for t in 1..=n {
            let rec = w.step(&StreamItem::new(t, 0.9, None).unwrap()).unwrap();
            ratio_sum += rec.xi / exploration_amplitude(t, w.config());
        }
        let mean = ratio_sum / n as f64;
        // Z ~ U[0,1): sd 1/sqrt(12)
        let se = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn cr_is_symmetric_and_valid() {
        let items = stream(10, 10_000, 0.8);
        let mut w = wrapper(WrapperKind::Cr, 3.0, ProcedureKind::Lond, 9);
        let mut min_xi = f64::INFINITY;
        for item in &items {
            let rec = w.step(item).unwrap();
            rec.check(false).unwrap();
            min_xi = min_xi.min(rec.xi);
        }
        assert!(min_xi < 0.0);
    }

    #[test]
    fn decoupled_base_matches_bare_run() {
        for kind in ProcedureKind::ALL {
            let items = stream(12, 5000, 0.8);
            let mut w = wrapper(WrapperKind::Domt, 8.0, kind, 13);
            let mut bare = ProcedureSpec::new(kind, 0.05).build().unwrap();
            for item in &items {
                let rec = w.step(item).unwrap();
                let (thr, rejected) = bare.step(item.p_value);
                assert_eq!(rec.lambda_base.to_bits(), thr.to_bits());
                assert_eq!(rec.delta_base, rejected);
            }
        }
    }
}
