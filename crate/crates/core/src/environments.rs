//! Stream generators: stationary and bursty mixtures, the deterministic
//! two-phase construction, a drought with signal on both sides, and a
//! p-value file reader.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{StreamItem, Truth};
use crate::sampling::{AltDistribution, RngState};

/// Column layout of a p-value file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// 0-based column holding the p-value.
    pub p_col: usize,
    /// 0-based column holding the label, if any.
    pub truth_col: Option<usize>,
    /// Leading lines to skip (headers).
    pub skip_lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Stationary {
        t: u64,
        pi0: f64,
        alt: AltDistribution,
    },
    /// Pure nulls for `t <= t0`, then a Bernoulli mixture with null
    /// probability `pi_post`.
    Bursty {
        t: u64,
        t0: u64,
        pi_post: f64,
        alt: AltDistribution,
    },
    /// Nulls for the first half, alternatives for the second half.
    TwoPhase { t: u64, alt: AltDistribution },
    /// Mixture for `t <= t0`, `k` pure nulls, then the mixture again.
    Drought {
        t: u64,
        t0: u64,
        k: u64,
        pi0: f64,
        alt: AltDistribution,
    },
    File {
        path: PathBuf,
        mapping: ColumnMapping,
    },
}

impl EnvironmentSpec {
    pub fn stationary_default() -> Self {
        EnvironmentSpec::Stationary {
            t: 5000,
            pi0: 0.8,
            alt: AltDistribution::Beta { a: 0.05, b: 20.0 },
        }
    }

    pub fn bursty_default() -> Self {
        EnvironmentSpec::Bursty {
            t: 6000,
            t0: 3000,
            pi_post: 0.2,
            alt: AltDistribution::Beta { a: 0.3, b: 15.0 },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvironmentSpec::Stationary { .. } => "stationary",
            EnvironmentSpec::Bursty { .. } => "bursty",
            EnvironmentSpec::TwoPhase { .. } => "two_phase",
            EnvironmentSpec::Drought { .. } => "drought",
            EnvironmentSpec::File { .. } => "file",
        }
    }

    /// Horizon, when known without reading a file.
    pub fn horizon(&self) -> Option<u64> {
        match *self {
            EnvironmentSpec::Stationary { t, .. }
            | EnvironmentSpec::Bursty { t, .. }
            | EnvironmentSpec::TwoPhase { t, .. }
            | EnvironmentSpec::Drought { t, .. } => Some(t),
            EnvironmentSpec::File { .. } => None,
        }
    }

    /// Burst delay ratio `T0 / T`.
    pub fn rho(&self) -> Option<f64> {
        match *self {
            EnvironmentSpec::Bursty { t, t0, .. } => Some(t0 as f64 / t as f64),
            EnvironmentSpec::TwoPhase { .. } => Some(0.5),
            _ => None,
        }
    }

    pub fn alt(&self) -> Option<AltDistribution> {
        match *self {
            EnvironmentSpec::Stationary { alt, .. }
            | EnvironmentSpec::Bursty { alt, .. }
            | EnvironmentSpec::TwoPhase { alt, .. }
            | EnvironmentSpec::Drought { alt, .. } => Some(alt),
            EnvironmentSpec::File { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_prob = |name: &str, v: f64, upper_open: bool| -> Result<()> {
            let ok = if upper_open {
                (0.0..1.0).contains(&v)
            } else {
                (0.0..=1.0).contains(&v)
            };
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{name} out of range: {v}")))
            }
        };
        if let Some(t) = self.horizon() {
            if t == 0 {
                return Err(Error::config("horizon t must be >= 1"));
            }
        }
        if let Some(alt) = self.alt() {
            alt.validate()?;
        }
        match *self {
            EnvironmentSpec::Stationary { pi0, .. } => check_prob("pi0", pi0, false),
            EnvironmentSpec::Bursty { t, t0, pi_post, .. } => {
                if !(t0 > 0 && t0 < t) {
                    return Err(Error::config(format!(
                        "bursty onset must satisfy 0 < t0 < t, got t0={t0}, t={t}"
                    )));
                }
                check_prob("pi_post", pi_post, true)
            }
            EnvironmentSpec::TwoPhase { t, .. } => {
                if t % 2 != 0 {
                    return Err(Error::config(format!(
                        "two-phase horizon must be even, got {t}"
                    )));
                }
                Ok(())
            }
            EnvironmentSpec::Drought { t, t0, k, pi0, .. } => {
                if t0 + k > t {
                    return Err(Error::config(format!(
                        "drought t0 + k = {} exceeds horizon {t}",
                        t0 + k
                    )));
                }
                check_prob("pi0", pi0, false)
            }
            EnvironmentSpec::File { .. } => Ok(()),
        }
    }

    /// A lazy generator over a synthetic environment.
    pub fn stream(&self, rng: RngState) -> Result<SyntheticStream> {
        self.validate()?;
        if matches!(self, EnvironmentSpec::File { .. }) {
            return Err(Error::config("file environments are read, not generated"));
        }
        Ok(SyntheticStream {
            spec: self.clone(),
            rng,
            t: 0,
        })
    }

    /// Materialises the whole stream (synthetic or file-backed).
    pub fn generate(&self, rng: RngState) -> Result<Vec<StreamItem>> {
        match self {
            EnvironmentSpec::File { path, mapping } => load_pvalue_file(path, mapping)?.collect(),
            _ => Ok(self.stream(rng)?.collect()),
        }
    }
}

/// Sequential generator for one replication.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: EnvironmentSpec,
    rng: RngState,
    t: u64,
}

impl SyntheticStream {
    fn label(&mut self, t: u64) -> Truth {
        let alt_with = |rng: &mut RngState, null_prob: f64| {
            if rng.bernoulli(null_prob) {
                Truth::Null
            } else {
                Truth::Alternative
            }
        };
        match self.spec {
            EnvironmentSpec::Stationary { pi0, .. } => alt_with(&mut self.rng, pi0),
            EnvironmentSpec::Bursty { t0, pi_post, .. } => {
                if t <= t0 {
                    Truth::Null
                } else {
                    alt_with(&mut self.rng, pi_post)
                }
            }
            EnvironmentSpec::TwoPhase { t: horizon, .. } => {
                if t <= horizon / 2 {
                    Truth::Null
                } else {
                    Truth::Alternative
                }
            }
            EnvironmentSpec::Drought { t0, k, pi0, .. } => {
                if t > t0 && t <= t0 + k {
                    Truth::Null
                } else {
                    alt_with(&mut self.rng, pi0)
                }
            }
            EnvironmentSpec::File { .. } => {
                unreachable!("file specs never build a SyntheticStream")
            }
        }
    }
}

impl Iterator for SyntheticStream {
    type Item = StreamItem;

    fn next(&mut self) -> Option<StreamItem> {
        let horizon = self.spec.horizon()?;
        if self.t >= horizon {
            return None;
        }
        self.t += 1;
        let t = self.t;
        let truth = self.label(t);
        let p_value = match truth {
            Truth::Null => self.rng.uniform01(),
            Truth::Alternative => self.spec.alt()?.sample(&mut self.rng),
        };
        Some(StreamItem {
            index: t,
            p_value,
            truth: Some(truth),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.horizon().unwrap_or(0).saturating_sub(self.t) as usize;
        (left, Some(left))
    }
}

fn parse_truth(raw: &str) -> Option<std::result::Result<Truth, String>> {
    let v = raw.trim();
    if v.is_empty() {
        return None;
    }
    Some(match v.to_ascii_lowercase().as_str() {
        "0" | "null" | "false" | "h0" => Ok(Truth::Null),
        "1" | "alt" | "alternative" | "true" | "h1" => Ok(Truth::Alternative),
        other => Err(format!("cannot interpret truth label {other:?}")),
    })
}

/// Lazy reader over a p-value file, one record per line.
pub struct PValueFile {
    path: PathBuf,
    mapping: ColumnMapping,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    index: u64,
}

impl PValueFile {
    fn parse_line(&self, line: &str) -> Result<Option<StreamItem>> {
        let err = |message: String| Error::Ingest {
            path: self.path.clone(),
            line: self.line_no,
            message,
        };
        if line.trim().is_empty() {
            return Ok(None);
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let raw = fields.get(self.mapping.p_col).ok_or_else(|| {
            err(format!(
                "missing p-value column {} ({} fields)",
                self.mapping.p_col,
                fields.len()
            ))
        })?;
        let p: f64 = raw
            .parse()
            .map_err(|_| err(format!("cannot parse p-value {raw:?}")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(err(format!("p-value {p} outside [0, 1]")));
        }
        let truth = match self.mapping.truth_col {
            Some(col) => match fields.get(col).and_then(|f| parse_truth(f)) {
                Some(Ok(t)) => Some(t),
                Some(Err(msg)) => return Err(err(msg)),
                None => None,
            },
            None => None,
        };
        Ok(Some(StreamItem {
            index: self.index + 1,
            p_value: p,
            truth,
        }))
    }
}

impl Iterator for PValueFile {
    type Item = Result<StreamItem>;

    fn next(&mut self) -> Option<Result<StreamItem>> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            if self.line_no <= self.mapping.skip_lines {
                continue;
            }
            match self.parse_line(&line) {
                Ok(Some(item)) => {
                    self.index += 1;
                    return Some(Ok(item));
                }
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Opens a p-value file for streaming. Blank lines are skipped.
pub fn load_pvalue_file(path: &Path, mapping: &ColumnMapping) -> Result<PValueFile> {
    let file = File::open(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        line: 0,
        message: format!("cannot open: {e}"),
    })?;
    Ok(PValueFile {
        path: path.to_path_buf(),
        mapping: mapping.clone(),
        lines: BufReader::new(file).lines(),
        line_no: 0,
        index: 0,
    })
}
