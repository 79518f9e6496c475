//! Replication runner and aggregation.
//!
//! Each replication derives its own seed, generates one stream, and replays
//! it through a bare base procedure and the wrapped variant in lockstep
//! (paired design). Replications run on a rayon pool; results are gathered
//! in replication order, so aggregates do not depend on scheduling.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::metrics::{dividend, ConfusionCounters, Estimate, TrajectoryPoint};
use crate::model::StreamItem;
use crate::sampling::{derive_seed, streams, RngState};
use crate::wrapper::Wrapper;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "DOMT_WORKERS";

/// Everything recorded for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub seed: u64,
    /// Counters of the bare base run.
    pub base: ConfusionCounters,
    /// Counters of the wrapped run.
    pub actual: ConfusionCounters,
    pub dividend: i64,
    /// The wrapper's `lambda_base` and `delta_base` matched the bare run at every step.
    pub virtual_invariant: bool,
    /// Steps with `delta_base = 1` and `delta_actual = 0`.
    pub subsumption_violations: u64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl ReplicationOutcome {
    /// Extra false positives `V_actual - V_base`.
    pub fn extra_false_positives(&self) -> i64 {
        self.actual.v as i64 - self.base.v as i64
    }

    /// Extra missed discoveries avoided, `M_base - M_actual`.
    pub fn recovered_misses(&self) -> i64 {
        self.base.m as i64 - self.actual.m as i64
    }
}

/// Terminal means over replications for one decision path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub v: Estimate,
    pub s: Estimate,
    pub m: Estimate,
    pub r: Estimate,
    pub fdp: Estimate,
    pub power: Estimate,
    pub regret: Estimate,
}

impl PathSummary {
    fn from_counters(counters: &[ConfusionCounters], cfg: &ExperimentConfig) -> Self {
        let col = |f: &dyn Fn(&ConfusionCounters) -> f64| {
            Estimate::from_samples(&counters.iter().map(f).collect::<Vec<_>>())
        };
        Self {
            v: col(&|c| c.v as f64),
            s: col(&|c| c.s as f64),
            m: col(&|c| c.m as f64),
            r: col(&|c| c.r as f64),
            fdp: col(&|c| c.fdp()),
            power: col(&|c| c.power()),
            regret: col(&|c| c.regret(&cfg.weights)),
        }
    }
}

/// Per-recorded-step estimates for the wrapped path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: u64,
    pub fdp: Estimate,
    pub power: Estimate,
    pub regret: Estimate,
    pub dividend: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub replications: u64,
    pub points: Vec<AggregatePoint>,
    pub base: PathSummary,
    pub actual: PathSummary,
    pub dividend: Estimate,
    /// `Regret_actual - Regret_base`, paired per path.
    pub regret_gap: Estimate,
    /// `V_actual - V_base`, paired per path.
    pub extra_false_positives: Estimate,
    pub virtual_invariance_failures: u64,
    pub subsumption_violations: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub aggregate: AggregateResult,
    pub outcomes: Vec<ReplicationOutcome>,
}

/// Worker count: `DOMT_WORKERS`, then the config, then all cores.
pub fn effective_workers(cfg: &ExperimentConfig) -> Result<usize> {
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        return match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(format!(
                "{WORKERS_ENV} must be a positive integer, got {raw:?}"
            ))),
        };
    }
    Ok(cfg.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }))
}

fn stream_for(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<StreamItem>> {
    let items = cfg
        .env
        .generate(RngState::with_stream(seed, streams::ENVIRONMENT))?;
    if let EnvironmentSpec::File { path, .. } = &cfg.env {
        if items.is_empty() {
            return Err(Error::config(format!(
                "{} holds no p-values",
                path.display()
            )));
        }
        if let Some(item) = items.iter().find(|i| i.truth.is_none()) {
            return Err(Error::config(format!(
                "{}: item {} has no truth label; use `ingest` for unlabelled streams",
                path.display(),
                item.index
            )));
        }
    }
    Ok(items)
}

/// Runs replication `r` on its own stream.
pub fn run_replication(cfg: &ExperimentConfig, r: u64) -> Result<ReplicationOutcome> {
    let seed = derive_seed(cfg.seed, r);
    let items = stream_for(cfg, seed)?;
    run_paired(cfg, r, seed, &items)
}

/// Replays one stream through the bare base and the wrapped variant.
pub fn run_paired(
    cfg: &ExperimentConfig,
    replication: u64,
    seed: u64,
    items: &[StreamItem],
) -> Result<ReplicationOutcome> {
    let horizon = items.len() as u64;
    let mut bare = cfg.procedure.build()?;
    let mut wrapped = Wrapper::new(
        cfg.wrapper,
        cfg.procedure.build()?,
        RngState::with_stream(seed, streams::WRAPPER),
    )?;
    let mut base = ConfusionCounters::default();
    let mut actual = ConfusionCounters::default();
    let mut virtual_invariant = true;
    let mut subsumption_violations = 0;
    let capacity = horizon.div_ceil(cfg.record_stride) as usize;
    let mut trajectory = Vec::with_capacity(capacity);

    for item in items {
        let (lambda_bare, rejected_bare) = bare.step(item.p_value);
        let rec = wrapped.step(item)?;
        if rec.lambda_base.to_bits() != lambda_bare.to_bits() || rec.delta_base != rejected_bare {
            virtual_invariant = false;
        }
        if rec.delta_base && !rec.delta_actual {
            subsumption_violations += 1;
        }
        base.update(item.truth, rejected_bare)?;
        actual.update(item.truth, rec.delta_actual)?;
        let t = rec.t;
        if t % cfg.record_stride == 0 || t == horizon {
            trajectory.push(TrajectoryPoint::from_counters(
                &actual,
                &cfg.weights,
                rec.lambda_base,
                rec.lambda_actual,
                dividend(&base, &actual)?,
            ));
        }
    }

    Ok(ReplicationOutcome {
        replication,
        seed,
        base,
        actual,
        dividend: dividend(&base, &actual)?,
        virtual_invariant,
        subsumption_violations,
        trajectory,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_owned()
    }
}

fn guarded(cfg: &ExperimentConfig, r: u64) -> Result<ReplicationOutcome> {
    catch_unwind(AssertUnwindSafe(|| run_replication(cfg, r))).unwrap_or_else(|payload| {
        Err(Error::ReplicationPanic {
            replication: r,
            seed: derive_seed(cfg.seed, r),
            message: panic_message(payload),
        })
    })
}

/// Runs every replication and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_progress(cfg, &|_, _| {})
}

/// As [`run_experiment`], calling `progress(done, total)` after each replication.
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(u64, u64) + Sync),
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let workers = effective_workers(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    let total = cfg.replications;
    let done = std::sync::atomic::AtomicU64::new(0);
    let results: Vec<Result<ReplicationOutcome>> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|r| {
                let out = guarded(cfg, r);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(n, total);
                out
            })
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(cfg, &outcomes)?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        aggregate,
        outcomes,
    })
}

/// Aggregates outcomes given in replication order.
pub fn aggregate(
    cfg: &ExperimentConfig,
    outcomes: &[ReplicationOutcome],
) -> Result<AggregateResult> {
    let first = outcomes
        .first()
        .ok_or_else(|| Error::contract("nothing to aggregate"))?;
    let grid: Vec<u64> = first.trajectory.iter().map(|p| p.t).collect();
    if let Some(o) = outcomes
        .iter()
        .find(|o| o.trajectory.iter().map(|p| p.t).ne(grid.iter().copied()))
    {
        return Err(Error::contract(format!(
            "replication {} recorded a different step grid",
            o.replication
        )));
    }
    let points = grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col = |f: &dyn Fn(&TrajectoryPoint) -> f64| {
                Estimate::from_samples(
                    &outcomes
                        .iter()
                        .map(|o| f(&o.trajectory[k]))
                        .collect::<Vec<_>>(),
                )
            };
            AggregatePoint {
                t,
                fdp: col(&|p| p.fdp),
                power: col(&|p| p.power),
                regret: col(&|p| p.regret),
                dividend: col(&|p| p.dividend as f64),
            }
        })
        .collect();
    let base: Vec<_> = outcomes.iter().map(|o| o.base).collect();
    let actual: Vec<_> = outcomes.iter().map(|o| o.actual).collect();
    let paired = |f: &dyn Fn(&ReplicationOutcome) -> f64| {
        Estimate::from_samples(&outcomes.iter().map(f).collect::<Vec<_>>())
    };
    Ok(AggregateResult {
        replications: outcomes.len() as u64,
        points,
        base: PathSummary::from_counters(&base, cfg),
        actual: PathSummary::from_counters(&actual, cfg),
        dividend: paired(&|o| o.dividend as f64),
        regret_gap: paired(&|o| o.actual.regret(&cfg.weights) - o.base.regret(&cfg.weights)),
        extra_false_positives: paired(&|o| o.extra_false_positives() as f64),
        virtual_invariance_failures: outcomes.iter().filter(|o| !o.virtual_invariant).count()
            as u64,
        subsumption_violations: outcomes.iter().map(|o| o.subsumption_violations).sum(),
    })
}
