//! Deterministic online testing procedures as predictable state machines.
//!
//! Every procedure follows the same contract:
//!
//! 1. [`Procedure::threshold`] computes the level for step `t = steps + 1`
//!    from the history supplied so far. It never sees the current p-value.
//! 2. The caller decides (with [`Procedure::rejects`]) and computes the
//!    candidate/discard flags (with [`Procedure::flags`]).
//! 3. [`Procedure::update`] advances the state with an explicitly supplied
//!    decision. Nothing else is consulted.
//!
//! That split is what lets a wrapper feed the procedure virtual decisions
//! while acting on different ones.
//!
//! LORD++, SAFFRON and ADDIS share one ledger ([`WealthLedger`]): LORD++ is
//! the special case without candidates or discarding, SAFFRON has candidates
//! but never discards.
//!
//! ```text
//!   alpha_t = min(cap, scale * [ W0 * g(1 + S - C)
//!                              + (alpha - W0) * g(1 + S - s_1 - (C - c_1))
//!                              + alpha * sum_{j>=2} g(1 + S - s_j - (C - c_j)) ])
//! ```
//!
//! where `S` counts non-discarded steps so far, `C` counts candidates so far,
//! and `(s_j, c_j)` are those counts frozen at the j-th rejection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GammaSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Lond,
    /// LORD++.
    Lord,
    Saffron,
    Addis,
    Elond,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 5] = [
        ProcedureKind::Lond,
        ProcedureKind::Lord,
        ProcedureKind::Saffron,
        ProcedureKind::Addis,
        ProcedureKind::Elond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureKind::Lond => "lond",
            ProcedureKind::Lord => "lord",
            ProcedureKind::Saffron => "saffron",
            ProcedureKind::Addis => "addis",
            ProcedureKind::Elond => "elond",
        }
    }
}

impl std::fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProcedureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProcedureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown procedure {s:?} (expected lond, lord, saffron, addis or elond)"
                ))
            })
    }
}

/// Declarative procedure parameters. Unset optional fields take the
/// per-procedure defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureSpec {
    #[serde(rename = "procedure")]
    pub kind: ProcedureKind,
    pub alpha: f64,
    /// Initial wealth; defaults to `alpha / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    /// Candidate level; defaults to 0.5 (SAFFRON) or 0.25 (ADDIS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cand: Option<f64>,
    /// Discarding level for ADDIS; defaults to 0.5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_disc: Option<f64>,
    /// Exponent of the power calibrator used by e-LOND.
    #[serde(default = "default_kappa_calibrator")]
    pub kappa_calibrator: f64,
}

fn default_kappa_calibrator() -> f64 {
    0.5
}

impl ProcedureSpec {
    pub fn new(kind: ProcedureKind, alpha: f64) -> Self {
        Self {
            kind,
            alpha,
            w0: None,
            lambda_cand: None,
            tau_disc: None,
            kappa_calibrator: default_kappa_calibrator(),
        }
    }

    pub fn w0(&self) -> f64 {
        self.w0.unwrap_or(self.alpha / 2.0)
    }

    pub fn lambda_cand(&self) -> f64 {
        self.lambda_cand.unwrap_or(match self.kind {
            ProcedureKind::Addis => 0.25,
            _ => 0.5,
        })
    }

    pub fn tau_disc(&self) -> f64 {
        self.tau_disc.unwrap_or(0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        match self.kind {
            ProcedureKind::Lond => {}
            ProcedureKind::Elond => {
                let k = self.kappa_calibrator;
                if !(k > 0.0 && k < 1.0) {
                    return Err(Error::config(format!(
                        "kappa_calibrator must lie in (0, 1), got {k}"
                    )));
                }
            }
            ProcedureKind::Lord | ProcedureKind::Saffron | ProcedureKind::Addis => {
                let w0 = self.w0();
                if !(w0 > 0.0 && w0 <= alpha) {
                    return Err(Error::config(format!(
                        "w0 must lie in (0, alpha], got {w0}"
                    )));
                }
            }
        }
        if matches!(self.kind, ProcedureKind::Saffron | ProcedureKind::Addis) {
            let lc = self.lambda_cand();
            if !(lc > 0.0 && lc < 1.0) {
                return Err(Error::config(format!(
                    "lambda_cand must lie in (0, 1), got {lc}"
                )));
            }
        }
        if self.kind == ProcedureKind::Addis {
            let (lc, tau) = (self.lambda_cand(), self.tau_disc());
            if !(tau > lc && tau <= 1.0) {
                return Err(Error::config(format!(
                    "tau_disc must lie in (lambda_cand, 1], got tau_disc={tau}, lambda_cand={lc}"
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Procedure> {
        self.validate()?;
        let engine = match self.kind {
            ProcedureKind::Lond => Engine::Lond,
            ProcedureKind::Elond => Engine::Elond {
                kappa: self.kappa_calibrator,
            },
            ProcedureKind::Lord => {
                Engine::Wealth(WealthLedger::new(self.alpha, self.w0(), None, None))
            }
            ProcedureKind::Saffron => Engine::Wealth(WealthLedger::new(
                self.alpha,
                self.w0(),
                Some(self.lambda_cand()),
                None,
            )),
            ProcedureKind::Addis => Engine::Wealth(WealthLedger::new(
                self.alpha,
                self.w0(),
                Some(self.lambda_cand()),
                Some(self.tau_disc()),
            )),
        };
        Ok(Procedure {
            kind: self.kind,
            alpha: self.alpha,
            gamma: GammaSequence::default(),
            steps: 0,
            rejections: 0,
            infinite_evidence: 0,
            engine,
        })
    }
}

/// Per-step bookkeeping flags computed from the p-value by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub candidate: bool,
    pub discarded: bool,
}

/// Rejection bookkeeping shared by LORD++, SAFFRON and ADDIS.
#[derive(Debug, Clone)]
pub struct WealthLedger {
    alpha: f64,
    w0: f64,
    lambda_cand: Option<f64>,
    tau_disc: Option<f64>,
    scale: f64,
    non_discarded: u64,
    candidates: u64,
    // (non_discarded, candidates) counts including the rejection step itself
    marks: Vec<(u64, u64)>,
}

impl WealthLedger {
    fn new(alpha: f64, w0: f64, lambda_cand: Option<f64>, tau_disc: Option<f64>) -> Self {
        let scale = tau_disc.unwrap_or(1.0) - lambda_cand.unwrap_or(0.0);
        Self {
            alpha,
            w0,
            lambda_cand,
            tau_disc,
            scale,
            non_discarded: 0,
            candidates: 0,
            marks: Vec::new(),
        }
    }

    #[inline]
    fn index_since(&self, s: u64, c: u64) -> u64 {
        // candidates are never discarded, so (C - c) <= (S - s)
        1 + (self.non_discarded - s).saturating_sub(self.candidates - c)
    }

    fn threshold(&self, gamma: &GammaSequence) -> f64 {
        let mut sum = self.w0 * gamma.get(self.index_since(0, 0));
        for (j, &(s, c)) in self.marks.iter().enumerate() {
            let weight = if j == 0 {
                self.alpha - self.w0
            } else {
                self.alpha
            };
            sum += weight * gamma.get(self.index_since(s, c));
        }
        let level = self.scale * sum;
        match self.lambda_cand {
            Some(cap) => level.min(cap),
            None => level,
        }
    }

    fn flags(&self, p: f64) -> StepFlags {
        let discarded = self.tau_disc.is_some_and(|tau| p > tau);
        let candidate = !discarded && self.lambda_cand.is_some_and(|l| p <= l);
        StepFlags {
            candidate,
            discarded,
        }
    }

    fn update(&mut self, rejected: bool, flags: StepFlags) {
        if !flags.discarded {
            self.non_discarded += 1;
        }
        if flags.candidate && self.lambda_cand.is_some() {
            self.candidates += 1;
        }
        if rejected {
            self.marks.push((self.non_discarded, self.candidates));
        }
    }

    /// Number of steps the effective clock has advanced.
    pub fn effective_time(&self) -> u64 {
        self.non_discarded
    }

    pub fn rejection_marks(&self) -> &[(u64, u64)] {
        &self.marks
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Lond,
    Elond { kappa: f64 },
    Wealth(WealthLedger),
}

/// A running base procedure.
#[derive(Debug, Clone)]
pub struct Procedure {
    kind: ProcedureKind,
    alpha: f64,
    gamma: GammaSequence,
    steps: u64,
    rejections: u64,
    infinite_evidence: u64,
    engine: Engine,
}

impl Procedure {
    pub fn kind(&self) -> ProcedureKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of updates received so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The step the next threshold applies to.
    pub fn next_t(&self) -> u64 {
        self.steps + 1
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Steps where e-LOND saw `p = 0` (infinite evidence, always rejected).
    pub fn infinite_evidence_steps(&self) -> u64 {
        self.infinite_evidence
    }

    pub fn ledger(&self) -> Option<&WealthLedger> {
        match &self.engine {
            Engine::Wealth(l) => Some(l),
            _ => None,
        }
    }

    /// Threshold for step `steps + 1`.
    pub fn threshold(&self) -> f64 {
        let t = self.next_t();
        match &self.engine {
            Engine::Lond | Engine::Elond { .. } => {
                self.alpha * self.gamma.get(t) * self.rejections.max(1) as f64
            }
            Engine::Wealth(ledger) => ledger.threshold(&self.gamma),
        }
    }

    /// Threshold for step `t`, checking that the state has seen exactly `t - 1` updates.
    pub fn threshold_at(&self, t: u64) -> Result<f64> {
        if t != self.next_t() {
            return Err(Error::contract(format!(
                "{} state has seen {} steps; cannot produce a threshold for t={t}",
                self.kind, self.steps
            )));
        }
        Ok(self.threshold())
    }

    /// e-value of the power calibrator `e(p) = k · p^(k-1)`.
    pub fn e_value(kappa: f64, p: f64) -> f64 {
        if p <= 0.0 {
            f64::INFINITY
        } else {
            kappa * p.powf(kappa - 1.0)
        }
    }

    /// Decision rule for a given level. Ties reject.
    #[inline]
    pub fn rejects(&self, threshold: f64, p: f64) -> bool {
        match self.engine {
            Engine::Elond { kappa } => {
                threshold > 0.0 && Self::e_value(kappa, p) >= 1.0 / threshold
            }
            _ => p <= threshold,
        }
    }

    pub fn flags(&self, p: f64) -> StepFlags {
        match &self.engine {
            Engine::Wealth(ledger) => ledger.flags(p),
            _ => StepFlags::default(),
        }
    }

    /// Advances the state by one step with the supplied decision and flags.
    pub fn update(&mut self, rejected: bool, flags: StepFlags) {
        self.steps += 1;
        if rejected {
            self.rejections += 1;
        }
        if let Engine::Wealth(ledger) = &mut self.engine {
            ledger.update(rejected, flags);
        }
        self.gamma.ensure(self.steps + 1);
    }

    /// Runs the procedure on its own for one step: threshold, decision, update.
    pub fn step(&mut self, p: f64) -> (f64, bool) {
        let threshold = self.threshold();
        let rejected = self.rejects(threshold, p);
        if p <= 0.0 && matches!(self.engine, Engine::Elond { .. }) {
            self.infinite_evidence += 1;
        }
        let flags = self.flags(p);
        self.update(rejected, flags);
        (threshold, rejected)
    }
}
