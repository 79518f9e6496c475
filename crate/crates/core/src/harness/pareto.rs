//! Pareto points `(mean V_T, mean M_T)` for a family of configurations
//! sharing one environment and seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::run_experiment;
use crate::metrics::Estimate;
use crate::procedures::ProcedureKind;
use crate::wrapper::WrapperKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub label: String,
    pub procedure: ProcedureKind,
    /// `None` for the bare base path.
    pub wrapper: Option<WrapperKind>,
    pub kappa: f64,
    pub v: Estimate,
    pub m: Estimate,
    /// Paired differences against the base path of the same procedure.
    pub delta_v: Estimate,
    pub delta_m: Estimate,
}

impl ParetoPoint {
    pub fn is_base(&self) -> bool {
        self.wrapper.is_none()
    }
}

/// Label such as `lond` or `lond+domt(kappa=3)`.
pub fn label(procedure: ProcedureKind, wrapper: Option<(WrapperKind, f64)>) -> String {
    match wrapper {
        None => procedure.name().to_owned(),
        Some((w, kappa)) => format!("{}+{}(kappa={})", procedure.name(), w.name(), kappa),
    }
}

/// One base point per distinct procedure (first occurrence) followed by its
/// wrapped point, for every configuration in order.
pub fn pareto_points(cfgs: &[ExperimentConfig]) -> Result<Vec<ParetoPoint>> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::config("pareto needs at least one configuration"))?;
    for cfg in cfgs {
        if cfg.env != first.env {
            return Err(Error::config(format!(
                "pareto configurations must share one environment ({} vs {})",
                first.env.name(),
                cfg.env.name()
            )));
        }
        if cfg.seed != first.seed || cfg.replications != first.replications {
            return Err(Error::config(
                "pareto configurations must share seed and replication count",
            ));
        }
    }
    let mut points = Vec::new();
    let mut seen: Vec<ProcedureKind> = Vec::new();
    for cfg in cfgs {
        let mut cfg = cfg.clone();
        if let Some(t) = cfg.env.horizon() {
            cfg.record_stride = t;
        }
        let res = run_experiment(&cfg)?;
        let agg = &res.aggregate;
        let kind = cfg.procedure.kind;
        let paired_m: Vec<f64> = res
            .outcomes
            .iter()
            .map(|o| -(o.recovered_misses() as f64))
            .collect();
        if !seen.contains(&kind) {
            seen.push(kind);
            points.push(ParetoPoint {
                label: label(kind, None),
                procedure: kind,
                wrapper: None,
                kappa: 0.0,
                v: agg.base.v,
                m: agg.base.m,
                delta_v: Estimate::from_samples(&[0.0]),
                delta_m: Estimate::from_samples(&[0.0]),
            });
        }
        points.push(ParetoPoint {
            label: label(kind, Some((cfg.wrapper.variant, cfg.wrapper.kappa))),
            procedure: kind,
            wrapper: Some(cfg.wrapper.variant),
            kappa: cfg.wrapper.kappa,
            v: agg.actual.v,
            m: agg.actual.m,
            delta_v: agg.extra_false_positives,
            delta_m: Estimate::from_samples(&paired_m),
        });
    }
    Ok(points)
}
