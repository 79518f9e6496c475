//! Experiment configuration.
//!
//! [`ConfigFile`] is the flat, all-optional text form (TOML or JSON) whose
//! keys the CLI flags mirror one-to-one. [`ExperimentConfig`] is the resolved,
//! validated form the harness runs. Resolving fills per-environment defaults;
//! [`ExperimentConfig::to_file`] writes every field back out, which is what
//! the summary JSON echoes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environments::{ColumnMapping, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::model::RegretWeights;
use crate::procedures::{ProcedureKind, ProcedureSpec};
use crate::sampling::AltDistribution;
use crate::wrapper::{DomtConfig, WrapperKind};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPLICATIONS: u64 = 100;
pub const DEFAULT_RECORD_STRIDE: u64 = 10;
pub const DEFAULT_TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DEFAULT_SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EnvKind {
    Stationary,
    Bursty,
    TwoPhase,
    Drought,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AltKind {
    Beta,
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AltKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_lines: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// Flat configuration as written in a file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_post: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<ProcedureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_disc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_calibrator: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrapper: Option<WrapperKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<AltSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<FileSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

macro_rules! overlay_fields {
    ($dst:expr, $src:expr; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ConfigFile {
    /// Applies every key set in `top` over `self`.
    pub fn overlay(&mut self, top: &ConfigFile) {
        overlay_fields!(self, top; env, t, t0, k, pi0, pi_post, procedure, alpha, w0,
            lambda_cand, tau_disc, kappa_calibrator, wrapper, kappa, a, b, seed,
            replications, record_stride, workers);
        if let Some(alt) = &top.alt {
            let dst = self.alt.get_or_insert_with(Default::default);
            overlay_fields!(dst, alt; kind, a, b, slope);
        }
        if let Some(file) = &top.file {
            let dst = self.file.get_or_insert_with(Default::default);
            overlay_fields!(dst, file; path, p_col, truth_col, skip_lines);
        }
        if let Some(out) = &top.output {
            let dst = self.output.get_or_insert_with(Default::default);
            overlay_fields!(dst, out; trajectory, summary);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let is_json =
            origin.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            serde_json::from_str(text).map_err(|e| Error::ConfigParse {
                path: origin.to_path_buf(),
                message: e.to_string(),
            })
        } else {
            toml::from_str(text).map_err(|e| Error::ConfigParse {
                path: origin.to_path_buf(),
                message: e.to_string(),
            })
        }
    }

    /// Reads a TOML or JSON config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path)
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let env_kind = self.env.unwrap_or(EnvKind::Stationary);
        let alt = self.resolve_alt(env_kind)?;
        let env = match env_kind {
            EnvKind::Stationary => EnvironmentSpec::Stationary {
                t: self.t.unwrap_or(5000),
                pi0: self.pi0.unwrap_or(0.8),
                alt,
            },
            EnvKind::Bursty => {
                let t = self.t.unwrap_or(6000);
                EnvironmentSpec::Bursty {
                    t,
                    t0: self.t0.unwrap_or(t / 2),
                    pi_post: self.pi_post.unwrap_or(0.2),
                    alt,
                }
            }
            EnvKind::TwoPhase => EnvironmentSpec::TwoPhase {
                t: self.t.unwrap_or(2000),
                alt,
            },
            EnvKind::Drought => EnvironmentSpec::Drought {
                t: self.t.unwrap_or(5000),
                t0: self.t0.unwrap_or(1000),
                k: self.k.unwrap_or(2000),
                pi0: self.pi0.unwrap_or(0.8),
                alt,
            },
            EnvKind::File => {
                let file = self.file.clone().unwrap_or_default();
                let path = file
                    .path
                    .ok_or_else(|| Error::config("env = \"file\" needs file.path"))?;
                EnvironmentSpec::File {
                    path,
                    mapping: ColumnMapping {
                        p_col: file.p_col.unwrap_or(0),
                        truth_col: file.truth_col,
                        skip_lines: file.skip_lines.unwrap_or(0),
                    },
                }
            }
        };
        env.validate()?;

        let alpha = self.alpha.unwrap_or(0.05);
        let procedure = ProcedureSpec {
            kind: self.procedure.unwrap_or(ProcedureKind::Lond),
            alpha,
            w0: self.w0,
            lambda_cand: self.lambda_cand,
            tau_disc: self.tau_disc,
            kappa_calibrator: self.kappa_calibrator.unwrap_or(0.5),
        };
        procedure.validate()?;

        let default_kappa = if env_kind == EnvKind::Bursty {
            8.0
        } else {
            3.0
        };
        let wrapper = DomtConfig::new(
            self.wrapper.unwrap_or(WrapperKind::Domt),
            self.kappa.unwrap_or(default_kappa),
            alpha,
        )?;
        let weights = RegretWeights::new(self.a.unwrap_or(1.0), self.b.unwrap_or(1.0))?;

        let replications = self.replications.unwrap_or(DEFAULT_REPLICATIONS);
        if replications == 0 {
            return Err(Error::config("replications must be >= 1"));
        }
        let record_stride = self.record_stride.unwrap_or(DEFAULT_RECORD_STRIDE);
        if record_stride == 0 {
            return Err(Error::config("record_stride must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be >= 1"));
        }
        let out = self.output.clone().unwrap_or_default();
        let outputs = OutputNames {
            trajectory: out
                .trajectory
                .unwrap_or_else(|| DEFAULT_TRAJECTORY_FILE.to_owned()),
            summary: out
                .summary
                .unwrap_or_else(|| DEFAULT_SUMMARY_FILE.to_owned()),
        };
        outputs.validate()?;

        Ok(ExperimentConfig {
            env,
            procedure,
            wrapper,
            weights,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            replications,
            record_stride,
            workers: self.workers,
            outputs,
        })
    }

    fn resolve_alt(&self, env: EnvKind) -> Result<AltDistribution> {
        let default = match env {
            EnvKind::Bursty => AltDistribution::Beta { a: 0.3, b: 15.0 },
            EnvKind::TwoPhase => AltDistribution::LinearDetectability { slope: 5.0 },
            _ => AltDistribution::Beta { a: 0.05, b: 20.0 },
        };
        let section = self.alt.clone().unwrap_or_default();
        let kind = section.kind.unwrap_or(match default {
            AltDistribution::Beta { .. } => AltKind::Beta,
            AltDistribution::LinearDetectability { .. } => AltKind::Linear,
        });
        let alt = match kind {
            AltKind::Beta => {
                let (da, db) = match default {
                    AltDistribution::Beta { a, b } => (a, b),
                    _ => (0.05, 20.0),
                };
                AltDistribution::Beta {
                    a: section.a.unwrap_or(da),
                    b: section.b.unwrap_or(db),
                }
            }
            AltKind::Linear => {
                let ds = match default {
                    AltDistribution::LinearDetectability { slope } => slope,
                    _ => 5.0,
                };
                AltDistribution::LinearDetectability {
                    slope: section.slope.unwrap_or(ds),
                }
            }
        };
        alt.validate()?;
        Ok(alt)
    }
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputNames {
    pub trajectory: String,
    pub summary: String,
}

impl OutputNames {
    pub fn validate(&self) -> Result<()> {
        for name in [&self.trajectory, &self.summary] {
            let p = Path::new(name);
            let plain = p.components().count() == 1
                && matches!(p.components().next(), Some(std::path::Component::Normal(_)));
            if name.is_empty() || !plain {
                return Err(Error::config(format!(
                    "output name {name:?} must be a plain file name inside the output directory"
                )));
            }
        }
        Ok(())
    }
}

impl Default for OutputNames {
    fn default() -> Self {
        Self {
            trajectory: DEFAULT_TRAJECTORY_FILE.to_owned(),
            summary: DEFAULT_SUMMARY_FILE.to_owned(),
        }
    }
}

/// A fully resolved, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvironmentSpec,
    pub procedure: ProcedureSpec,
    pub wrapper: DomtConfig,
    pub weights: RegretWeights,
    pub seed: u64,
    pub replications: u64,
    pub record_stride: u64,
    pub workers: Option<usize>,
    pub outputs: OutputNames,
}

impl ExperimentConfig {
    /// Defaults for an environment (stationary: LOND + DOMT, kappa 3; bursty: kappa 8).
    pub fn defaults(env: EnvKind) -> Self {
        ConfigFile {
            env: Some(env),
            ..Default::default()
        }
        .resolve()
        .expect("built-in defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.procedure.validate()?;
        self.wrapper.validate()?;
        if self.wrapper.alpha != self.procedure.alpha {
            return Err(Error::config("wrapper and procedure alpha differ"));
        }
        if self.replications == 0 || self.record_stride == 0 {
            return Err(Error::config("replications and record_stride must be >= 1"));
        }
        self.outputs.validate()
    }

    pub fn with_procedure(mut self, kind: ProcedureKind) -> Self {
        self.procedure.kind = kind;
        self
    }

    pub fn with_wrapper(mut self, variant: WrapperKind, kappa: f64) -> Self {
        self.wrapper.variant = variant;
        self.wrapper.kappa = kappa;
        self
    }

    pub fn with_env(mut self, env: EnvironmentSpec) -> Self {
        self.env = env;
        self
    }

    pub fn with_replications(mut self, n: u64) -> Self {
        self.replications = n;
        self
    }

    /// Echo of every field in file form.
    pub fn to_file(&self) -> ConfigFile {
        let mut f = ConfigFile {
            procedure: Some(self.procedure.kind),
            alpha: Some(self.procedure.alpha),
            w0: self.procedure.w0,
            lambda_cand: self.procedure.lambda_cand,
            tau_disc: self.procedure.tau_disc,
            kappa_calibrator: Some(self.procedure.kappa_calibrator),
            wrapper: Some(self.wrapper.variant),
            kappa: Some(self.wrapper.kappa),
            a: Some(self.weights.a()),
            b: Some(self.weights.b()),
            seed: Some(self.seed),
            replications: Some(self.replications),
            record_stride: Some(self.record_stride),
            workers: self.workers,
            output: Some(OutputSection {
                trajectory: Some(self.outputs.trajectory.clone()),
                summary: Some(self.outputs.summary.clone()),
            }),
            ..Default::default()
        };
        let alt_section = |alt: &AltDistribution| match *alt {
            AltDistribution::Beta { a, b } => AltSection {
                kind: Some(AltKind::Beta),
                a: Some(a),
                b: Some(b),
                slope: None,
            },
            AltDistribution::LinearDetectability { slope } => AltSection {
                kind: Some(AltKind::Linear),
                slope: Some(slope),
                ..Default::default()
            },
        };
        match &self.env {
            EnvironmentSpec::Stationary { t, pi0, alt } => {
                f.env = Some(EnvKind::Stationary);
                f.t = Some(*t);
                f.pi0 = Some(*pi0);
                f.alt = Some(alt_section(alt));
            }
            EnvironmentSpec::Bursty {
                t,
                t0,
                pi_post,
                alt,
            } => {
                f.env = Some(EnvKind::Bursty);
                f.t = Some(*t);
                f.t0 = Some(*t0);
                f.pi_post = Some(*pi_post);
                f.alt = Some(alt_section(alt));
            }
            EnvironmentSpec::TwoPhase { t, alt } => {
                f.env = Some(EnvKind::TwoPhase);
                f.t = Some(*t);
                f.alt = Some(alt_section(alt));
            }
            EnvironmentSpec::Drought { t, t0, k, pi0, alt } => {
                f.env = Some(EnvKind::Drought);
                f.t = Some(*t);
                f.t0 = Some(*t0);
                f.k = Some(*k);
                f.pi0 = Some(*pi0);
                f.alt = Some(alt_section(alt));
            }
            EnvironmentSpec::File { path, mapping } => {
                f.env = Some(EnvKind::File);
                f.file = Some(FileSection {
                    path: Some(path.clone()),
                    p_col: Some(mapping.p_col),
                    truth_col: mapping.truth_col,
                    skip_lines: Some(mapping.skip_lines),
                });
            }
        }
        f
    }
}
