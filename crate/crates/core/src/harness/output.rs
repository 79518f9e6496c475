//! Persistence: trajectory CSV, summary JSON, phase-map and Pareto CSVs.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers never observe a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::config::ConfigFile;
use crate::harness::experiment::{AggregateResult, ExperimentResult};
use crate::harness::pareto::ParetoPoint;
use crate::harness::sweep::PhaseMap;
use crate::metrics::TrajectoryRow;

/// Build identifier written into summaries and printed by `--version`.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}

/// Trajectory rows of the wrapped path, replication-major.
pub fn trajectory_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let procedure = result.config.procedure.kind.name();
    let wrapper = result.config.wrapper.variant.name();
    csv_bytes(result.outcomes.iter().flat_map(|o| {
        o.trajectory
            .iter()
            .map(move |p| TrajectoryRow::new(o.replication, procedure, wrapper, p))
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config: ConfigFile,
    pub environment: String,
    pub rho: Option<f64>,
    pub aggregate: AggregateResult,
}

impl Summary {
    pub fn new(result: &ExperimentResult) -> Self {
        Self {
            version: VERSION.to_owned(),
            config: result.config.to_file(),
            environment: result.config.env.name().to_owned(),
            rho: result.config.env.rho(),
            aggregate: result.aggregate.clone(),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::Serialize(e.to_string()))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Paths and digests of the files written for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenOutputs {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub trajectory_sha256: String,
    pub summary_sha256: String,
}

/// Writes the trajectory CSV and summary JSON into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<WrittenOutputs> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = trajectory_csv(result)?;
    let json = Summary::new(result).to_json()?;
    let trajectory = dir.join(&result.config.outputs.trajectory);
    let summary = dir.join(&result.config.outputs.summary);
    write_atomic(&trajectory, &csv)?;
    write_atomic(&summary, &json)?;
    Ok(WrittenOutputs {
        trajectory,
        summary,
        trajectory_sha256: sha256_hex(&csv),
        summary_sha256: sha256_hex(&json),
    })
}

#[derive(Serialize)]
struct PhaseRow {
    rho: f64,
    b_over_a: f64,
    diff_mean: f64,
    diff_se: f64,
    n: u64,
    outcome: &'static str,
    m_star: Option<f64>,
}

pub fn phase_map_csv(map: &PhaseMap) -> Result<Vec<u8>> {
    use crate::harness::sweep::CellOutcome;
    csv_bytes(map.cells.iter().map(|c| PhaseRow {
        rho: c.rho,
        b_over_a: c.b_over_a,
        diff_mean: c.diff.mean,
        diff_se: c.diff.se,
        n: c.diff.n,
        outcome: match c.outcome {
            CellOutcome::Win => "win",
            CellOutcome::Lose => "lose",
            CellOutcome::Tie => "tie",
        },
        m_star: c.m_star,
    }))
}

#[derive(Serialize)]
struct ParetoRow<'a> {
    label: &'a str,
    procedure: &'a str,
    wrapper: &'a str,
    kappa: f64,
    mean_v: f64,
    se_v: f64,
    mean_m: f64,
    se_m: f64,
    delta_v: f64,
    delta_m: f64,
}

pub fn pareto_csv(points: &[ParetoPoint]) -> Result<Vec<u8>> {
    csv_bytes(points.iter().map(|p| ParetoRow {
        label: &p.label,
        procedure: p.procedure.name(),
        wrapper: p.wrapper.map_or("base", |w| w.name()),
        kappa: p.kappa,
        mean_v: p.v.mean,
        se_v: p.v.se,
        mean_m: p.m.mean,
        se_m: p.m.se,
        delta_v: p.delta_v.mean,
        delta_m: p.delta_m.mean,
    }))
}
