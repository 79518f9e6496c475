//! Phase map of weighted-regret differences over `(b/a, rho)`.
//!
//! One paired experiment is run per burst delay ratio `rho`; every `b/a`
//! cell for that `rho` is then evaluated on the same per-path `(V, M)`
//! counts, since regret is linear in the weights.

use serde::{Deserialize, Serialize};

use crate::environments::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{run_experiment, ReplicationOutcome};
use crate::metrics::Estimate;
use crate::sampling::AltDistribution;
use crate::theory::{cold_start_tax, BurstyParams};

/// Sign of a cell at the 2·SE level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Win,
    Lose,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub rho: f64,
    pub b_over_a: f64,
    /// `Regret_base - Regret_wrapped`, per path; positive means the wrapper wins.
    pub diff: Estimate,
    pub outcome: CellOutcome,
    /// Closed-form critical ratio, when the alternative has a linear CDF.
    pub m_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub rho: f64,
    /// Log-interpolated `b/a` where the mean difference first turns positive.
    pub empirical: Option<f64>,
    pub m_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub cells: Vec<PhaseCell>,
    pub boundaries: Vec<PhaseBoundary>,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::config(format!(
            "log grid needs 0 < lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Default `rho` values 0.1, 0.2, ..., 0.9.
pub fn default_rhos() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Default `b/a` log-grid from 0.1 to 100.
pub fn default_ratios() -> Vec<f64> {
    log_grid(0.1, 100.0, 13).expect("static grid is valid")
}

/// Critical ratio for a bursty configuration, when defined.
pub fn m_star_for(env: &EnvironmentSpec) -> Option<f64> {
    match *env {
        EnvironmentSpec::Bursty {
            t,
            t0,
            pi_post,
            alt: AltDistribution::LinearDetectability { slope },
        } => BurstyParams::new(pi_post, slope, t0 as f64 / t as f64)
            .and_then(|p| cold_start_tax(&p))
            .ok(),
        _ => None,
    }
}

fn with_rho(base: &ExperimentConfig, rho: f64) -> Result<ExperimentConfig> {
    let EnvironmentSpec::Bursty {
        t, pi_post, alt, ..
    } = base.env
    else {
        return Err(Error::config(format!(
            "phase maps need a bursty environment, got {}",
            base.env.name()
        )));
    };
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config(format!("rho must lie in [0, 1), got {rho}")));
    }
    let mut cfg = base.clone();
    cfg.env = EnvironmentSpec::Bursty {
        t,
        t0: (rho * t as f64).round() as u64,
        pi_post,
        alt,
    };
    cfg.record_stride = t;
    cfg.validate()?;
    Ok(cfg)
}

/// Mean and SE of `b·(M_base - M_w) - a·(V_w - V_base)` at ratio `b/a`.
pub fn regret_difference(outcomes: &[ReplicationOutcome], a: f64, b_over_a: f64) -> Estimate {
    let b = a * b_over_a;
    let diffs: Vec<f64> = outcomes
        .iter()
        .map(|o| b * o.recovered_misses() as f64 - a * o.extra_false_positives() as f64)
        .collect();
    Estimate::from_samples(&diffs)
}

fn classify(e: &Estimate) -> CellOutcome {
    if e.mean > 2.0 * e.se {
        CellOutcome::Win
    } else if e.mean < -2.0 * e.se {
        CellOutcome::Lose
    } else {
        CellOutcome::Tie
    }
}

/// Log-interpolated first upward zero crossing of `mean` over ascending ratios.
pub fn sign_change(cells: &[(f64, f64)]) -> Option<f64> {
    cells.windows(2).find_map(|w| {
        let ((r0, m0), (r1, m1)) = (w[0], w[1]);
        (m0 <= 0.0 && m1 > 0.0).then(|| {
            let frac = -m0 / (m1 - m0);
            (r0.ln() + frac * (r1.ln() - r0.ln())).exp()
        })
    })
}

/// Builds the phase map over the cartesian product of `rhos` and `ratios`.
pub fn sweep_phase_map(base: &ExperimentConfig, rhos: &[f64], ratios: &[f64]) -> Result<PhaseMap> {
    if rhos.is_empty() || ratios.is_empty() {
        return Err(Error::config("phase-map grid is empty"));
    }
    if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::config(format!("b/a must be positive, got {r}")));
    }
    let configs = rhos
        .iter()
        .map(|&rho| with_rho(base, rho))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let a = base.weights.a();

    let mut cells = Vec::with_capacity(rhos.len() * ratios.len());
    let mut boundaries = Vec::with_capacity(rhos.len());
    for (&rho, cfg) in rhos.iter().zip(&configs) {
        let res = run_experiment(cfg)?;
        let m_star = m_star_for(&cfg.env);
        let mut curve = Vec::with_capacity(sorted.len());
        for &ratio in &sorted {
            let diff = regret_difference(&res.outcomes, a, ratio);
            curve.push((ratio, diff.mean));
            cells.push(PhaseCell {
                rho,
                b_over_a: ratio,
                diff,
                outcome: classify(&diff),
                m_star,
            });
        }
        boundaries.push(PhaseBoundary {
            rho,
            empirical: sign_change(&curve),
            m_star,
        });
    }
    Ok(PhaseMap { cells, boundaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ConfigFile, EnvKind};

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 100.0, 4).unwrap();
        assert!((g[0] - 0.1).abs() < 1e-12);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!((g[3] - 100.0).abs() < 1e-9);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn sign_change_interpolates_in_log_space() {
        let x = sign_change(&[(1.0, -1.0), (100.0, 1.0)]).unwrap();
        assert!((x - 10.0).abs() < 1e-9);
        assert_eq!(sign_change(&[(1.0, 1.0), (2.0, 2.0)]), None);
        assert_eq!(sign_change(&[(1.0, -1.0), (2.0, -0.5)]), None);
    }

    #[test]
    fn rejects_non_bursty_base() {
        let cfg = ConfigFile::default().resolve().unwrap();
        assert!(sweep_phase_map(&cfg, &[0.5], &[1.0])
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn m_star_matches_reference() {
        let env = EnvironmentSpec::Bursty {
            t: 4000,
            t0: 1000,
            pi_post: 0.8,
            alt: AltDistribution::LinearDetectability { slope: 5.0 },
        };
        assert!((m_star_for(&env).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(m_star_for(&EnvironmentSpec::bursty_default()), None);
    }

    #[test]
    fn extreme_cells_have_expected_sign() {
        let cfg = ConfigFile {
            env: Some(EnvKind::Bursty),
            t: Some(2000),
            pi_post: Some(0.8),
            alt: Some(crate::harness::config::AltSection {
                kind: Some(crate::harness::config::AltKind::Linear),
                slope: Some(5.0),
                ..Default::default()
            }),
            replications: Some(60),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let map = sweep_phase_map(&cfg, &[0.25], &[0.01, 18.0]).unwrap();
        assert_ne!(map.cells[0].outcome, CellOutcome::Win);
        assert_eq!(map.cells[1].outcome, CellOutcome::Win);
    }
}
