//! Decision-only run over a p-value file.
//!
//! The file is read lazily; each line is decided as soon as it is parsed and
//! the decision record is streamed to the output CSV. Metrics are reported
//! only when every line carries a truth label.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environments::{load_pvalue_file, ColumnMapping};
use crate::error::{Error, Result};
use crate::metrics::ConfusionCounters;
use crate::model::{DecisionRecord, RegretWeights};
use crate::procedures::ProcedureSpec;
use crate::sampling::{streams, RngState};
use crate::wrapper::{DomtConfig, Wrapper};

pub const DEFAULT_DECISIONS_FILE: &str = "decisions.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    pub path: PathBuf,
    pub mapping: ColumnMapping,
    pub procedure: ProcedureSpec,
    pub wrapper: DomtConfig,
    pub weights: RegretWeights,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub steps: u64,
    pub rejections_base: u64,
    pub rejections_actual: u64,
    /// Present when every item was labelled.
    pub base: Option<ConfusionCounters>,
    pub actual: Option<ConfusionCounters>,
}

#[derive(Serialize)]
struct DecisionRow {
    t: u64,
    p_value: f64,
    lambda_base: f64,
    xi: f64,
    lambda_actual: f64,
    delta_base: u8,
    delta_actual: u8,
}

/// Runs the wrapper over the file, calling `sink` for every decision.
pub fn ingest_with<F>(cfg: &IngestConfig, mut sink: F) -> Result<IngestSummary>
where
    F: FnMut(f64, &DecisionRecord) -> Result<()>,
{
    cfg.procedure.validate()?;
    cfg.wrapper.validate()?;
    let items = load_pvalue_file(&cfg.path, &cfg.mapping)?;
    let mut wrapper = Wrapper::new(
        cfg.wrapper,
        cfg.procedure.build()?,
        RngState::with_stream(cfg.seed, streams::WRAPPER),
    )?;
    let mut summary = IngestSummary {
        steps: 0,
        rejections_base: 0,
        rejections_actual: 0,
        base: Some(ConfusionCounters::default()),
        actual: Some(ConfusionCounters::default()),
    };
    for item in items {
        let item = item?;
        let rec = wrapper.step(&item)?;
        sink(item.p_value, &rec)?;
        summary.steps += 1;
        summary.rejections_base += rec.delta_base as u64;
        summary.rejections_actual += rec.delta_actual as u64;
        match item.truth {
            Some(_) => {
                if let (Some(b), Some(a)) = (summary.base.as_mut(), summary.actual.as_mut()) {
                    b.update(item.truth, rec.delta_base)?;
                    a.update(item.truth, rec.delta_actual)?;
                }
            }
            None => {
                summary.base = None;
                summary.actual = None;
            }
        }
    }
    if summary.steps == 0 {
        return Err(Error::config(format!(
            "{} holds no p-values",
            cfg.path.display()
        )));
    }
    Ok(summary)
}

/// Runs the wrapper over the file and writes `decisions.csv` into `dir`.
pub fn ingest_to_dir(cfg: &IngestConfig, dir: &Path) -> Result<(PathBuf, IngestSummary)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let target = dir.join(DEFAULT_DECISIONS_FILE);
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(tmp));
    let summary = ingest_with(cfg, |p, rec| {
        writer
            .serialize(DecisionRow {
                t: rec.t,
                p_value: p,
                lambda_base: rec.lambda_base,
                xi: rec.xi,
                lambda_actual: rec.lambda_actual,
                delta_base: rec.delta_base as u8,
                delta_actual: rec.delta_actual as u8,
            })
            .map_err(|e| Error::Serialize(e.to_string()))
    })?;
    let mut buffered = writer
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    buffered.flush().map_err(|e| Error::io(&target, e))?;
    let tmp = buffered
        .into_inner()
        .map_err(|e| Error::io(&target, e.into_error()))?;
    tmp.persist(&target)
        .map_err(|e| Error::io(&target, e.error))?;
    Ok((target, summary))
}
