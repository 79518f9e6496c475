//! Experiment orchestration: configuration, paired replications,
//! aggregation, sweeps, Pareto points, ingestion, and persistence.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod output;
pub mod pareto;
pub mod sweep;

pub use config::{ConfigFile, EnvKind, ExperimentConfig};
pub use experiment::{
    run_experiment, run_experiment_with_progress, run_replication, AggregateResult,
    ExperimentResult, ReplicationOutcome,
};
pub use output::{write_outputs, Summary, WrittenOutputs};
pub use pareto::{pareto_points, ParetoPoint};
pub use sweep::{sweep_phase_map, PhaseMap};
