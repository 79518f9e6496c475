//! Command-line front end.
//!
//! Every experiment flag mirrors a config-file key; precedence is
//! flags > config file > built-in defaults. Exit status is 0 on success,
//! 1 on invalid input, 2 when a run fails.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{
    AltKind, AltSection, ConfigFile, EnvKind, ExperimentConfig, FileSection, OutputSection,
};
use crate::harness::experiment::run_experiment_with_progress;
use crate::harness::ingest::{ingest_to_dir, IngestConfig};
use crate::harness::output::{
    pareto_csv, phase_map_csv, sha256_hex, write_atomic, write_outputs, VERSION,
};
use crate::harness::{pareto_points, sweep};
use crate::procedures::ProcedureKind;
use crate::theory;
use crate::wrapper::WrapperKind;

fn parse_procedure(s: &str) -> std::result::Result<ProcedureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_wrapper(s: &str) -> std::result::Result<WrapperKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "domt", version = VERSION, about = "Online multiple testing simulator with decoupled exploration")]
pub struct Cli {
    /// Suppress progress and informational output on standard error.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    /// Print more detail (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one paired base-versus-wrapper experiment and write trajectory CSV plus summary JSON.
    Run(RunArgs),
    /// Map weighted-regret differences over a (b/a, rho) grid in a bursty environment.
    Sweep(SweepArgs),
    /// Collect (mean V_T, mean M_T) points over procedures and kappa values.
    Pareto(ParetoArgs),
    /// Run the same experiment under the domt, cr and det_offset wrappers.
    Ablate(RunArgs),
    /// Print closed-form bounds and constants as a key-value table.
    Theory(TheoryArgs),
    /// Decide every p-value of a file with the wrapped procedure, streaming decisions to CSV.
    Ingest(RunArgs),
}

/// Experiment settings. Each flag overrides the config-file key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment.
    #[arg(long, value_enum)]
    pub env: Option<EnvKind>,
    /// Horizon T.
    #[arg(long)]
    pub t: Option<u64>,
    /// Burst onset (bursty) or drought start (drought).
    #[arg(long)]
    pub t0: Option<u64>,
    /// Drought length.
    #[arg(long)]
    pub k: Option<u64>,
    /// Null proportion (stationary, drought).
    #[arg(long)]
    pub pi0: Option<f64>,
    /// Null proportion after the burst onset (bursty).
    #[arg(long)]
    pub pi_post: Option<f64>,
    /// Alternative p-value law (key alt.kind).
    #[arg(long, value_enum)]
    pub alt_kind: Option<AltKind>,
    /// Beta shape a of the alternative (key alt.a).
    #[arg(long)]
    pub alt_a: Option<f64>,
    /// Beta shape b of the alternative (key alt.b).
    #[arg(long)]
    pub alt_b: Option<f64>,
    /// Detectability slope of the linear alternative (key alt.slope).
    #[arg(long)]
    pub alt_slope: Option<f64>,
    /// p-value file (key file.path).
    #[arg(long, visible_alias = "input")]
    pub file_path: Option<PathBuf>,
    /// 0-based p-value column (key file.p_col).
    #[arg(long)]
    pub p_col: Option<usize>,
    /// 0-based truth column (key file.truth_col).
    #[arg(long)]
    pub truth_col: Option<usize>,
    /// Leading lines to skip (key file.skip_lines).
    #[arg(long)]
    pub skip_lines: Option<usize>,
    /// Base procedure: lond, lord, saffron, addis or elond.
    #[arg(long, value_parser = parse_procedure)]
    pub procedure: Option<ProcedureKind>,
    /// Target level alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Initial wealth (default alpha/2).
    #[arg(long)]
    pub w0: Option<f64>,
    /// Candidate level for SAFFRON and ADDIS.
    #[arg(long)]
    pub lambda_cand: Option<f64>,
    /// Discarding level for ADDIS.
    #[arg(long)]
    pub tau_disc: Option<f64>,
    /// Power-calibrator exponent for e-LOND.
    #[arg(long)]
    pub kappa_calibrator: Option<f64>,
    /// Wrapper: none, domt, cr or det_offset.
    #[arg(long, value_parser = parse_wrapper)]
    pub wrapper: Option<WrapperKind>,
    /// Exploration strength kappa.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Regret weight on false positives.
    #[arg(long = "a")]
    pub a: Option<f64>,
    /// Regret weight on false negatives.
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo replications.
    #[arg(long)]
    pub replications: Option<u64>,
    /// Record a trajectory row every this many steps.
    #[arg(long)]
    pub record_stride: Option<u64>,
    /// Worker threads (DOMT_WORKERS takes precedence).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Trajectory file name inside the output directory (key output.trajectory).
    #[arg(long)]
    pub trajectory_name: Option<String>,
    /// Summary file name inside the output directory (key output.summary).
    #[arg(long)]
    pub summary_name: Option<String>,
}

impl ExperimentArgs {
    /// The flags as a config-file layer.
    pub fn as_layer(&self) -> ConfigFile {
        let alt = (self.alt_kind.is_some()
            || self.alt_a.is_some()
            || self.alt_b.is_some()
            || self.alt_slope.is_some())
        .then_some(AltSection {
            kind: self.alt_kind,
            a: self.alt_a,
            b: self.alt_b,
            slope: self.alt_slope,
        });
        let file = (self.file_path.is_some()
            || self.p_col.is_some()
            || self.truth_col.is_some()
            || self.skip_lines.is_some())
        .then(|| FileSection {
            path: self.file_path.clone(),
            p_col: self.p_col,
            truth_col: self.truth_col,
            skip_lines: self.skip_lines,
        });
        let output = (self.trajectory_name.is_some() || self.summary_name.is_some()).then(|| {
            OutputSection {
                trajectory: self.trajectory_name.clone(),
                summary: self.summary_name.clone(),
            }
        });
        ConfigFile {
            env: self.env,
            t: self.t,
            t0: self.t0,
            k: self.k,
            pi0: self.pi0,
            pi_post: self.pi_post,
            procedure: self.procedure,
            alpha: self.alpha,
            w0: self.w0,
            lambda_cand: self.lambda_cand,
            tau_disc: self.tau_disc,
            kappa_calibrator: self.kappa_calibrator,
            wrapper: self.wrapper,
            kappa: self.kappa,
            a: self.a,
            b: self.b,
            seed: self.seed,
            replications: self.replications,
            record_stride: self.record_stride,
            workers: self.workers,
            alt,
            file,
            output,
        }
    }

    /// Defaults, then the config file, then the flags.
    pub fn merged(&self, defaults: ConfigFile) -> Result<ConfigFile> {
        let mut merged = defaults;
        if let Some(path) = &self.config {
            merged.overlay(&ConfigFile::load(path)?);
        }
        merged.overlay(&self.as_layer());
        Ok(merged)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Output directory; nothing is written outside it.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Burst delay ratios (default 0.1,0.2,...,0.9).
    #[arg(long, value_delimiter = ',')]
    pub rhos: Vec<f64>,
    /// Explicit b/a values; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Vec<f64>,
    /// Smallest b/a of the log grid.
    #[arg(long, default_value_t = 0.1)]
    pub ratio_min: f64,
    /// Largest b/a of the log grid.
    #[arg(long, default_value_t = 100.0)]
    pub ratio_max: f64,
    /// Number of log-grid points.
    #[arg(long, default_value_t = 13)]
    pub ratio_points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Exploration strengths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,3,8")]
    pub kappas: Vec<f64>,
    /// Base procedures to sweep (default: the configured procedure).
    #[arg(long, value_delimiter = ',', value_parser = parse_procedure)]
    pub procedures: Vec<ProcedureKind>,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    /// Critical weight ratio M*(rho) (cold-start tax).
    #[arg(long)]
    pub tax: bool,
    /// Critical constants C1, C2.
    #[arg(long)]
    pub constants: bool,
    /// High-probability FDP inflation term.
    #[arg(long)]
    pub fdp_term: bool,
    /// Regret-gap bound a·kappa·alpha·sqrt(T).
    #[arg(long)]
    pub regret_gap: bool,
    /// Expected drought threshold ratio.
    #[arg(long)]
    pub drought: bool,
    /// Extra false-positive budget kappa·alpha·sqrt(T).
    #[arg(long)]
    pub budget: bool,
    /// Post-onset null proportion.
    #[arg(long, default_value_t = 0.8)]
    pub pi: f64,
    /// Detectability slope.
    #[arg(long, default_value_t = 5.0)]
    pub mu: f64,
    /// Burst delay ratio.
    #[arg(long, default_value_t = 0.25)]
    pub rho: f64,
    /// Time step or horizon.
    #[arg(long, default_value_t = 4096)]
    pub t: u64,
    /// Exploration strength.
    #[arg(long, default_value_t = 3.0)]
    pub kappa: f64,
    /// Target level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Failure probability for the FDP term.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Rejections R_t for the FDP term.
    #[arg(long, default_value_t = 1)]
    pub rejections: u64,
    /// Regret weight on false positives.
    #[arg(long = "a", default_value_t = 1.0)]
    pub a: f64,
    /// Base threshold for the drought ratio.
    #[arg(long, default_value_t = 0.001)]
    pub lambda_base: f64,
}

/// Formats a float with at most 12 decimals and no trailing zeros.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

pub fn theory_table(args: &TheoryArgs) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    let any = args.tax
        || args.constants
        || args.fdp_term
        || args.regret_gap
        || args.drought
        || args.budget;
    if !any {
        return Err(Error::config(
            "choose at least one of --tax, --constants, --fdp-term, --regret-gap, --drought, --budget",
        ));
    }
    if args.tax || args.constants {
        let p = theory::BurstyParams::new(args.pi, args.mu, args.rho)?;
        if args.tax {
            rows.push((
                "cold_start_tax".into(),
                format_value(theory::cold_start_tax(&p)?),
            ));
        }
        if args.constants {
            let (c1, c2) = theory::critical_constants(&p)?;
            rows.push(("c1".into(), format_value(c1)));
            rows.push(("c2".into(), format_value(c2)));
        }
    }
    if args.fdp_term {
        let v = theory::fdp_inflation_term(
            args.t,
            args.kappa,
            args.alpha,
            args.delta,
            args.rejections,
        )?;
        rows.push(("fdp_inflation_term".into(), format_value(v)));
    }
    if args.regret_gap {
        let v = theory::regret_gap_bound(args.t, args.a, args.kappa, args.alpha);
        rows.push(("regret_gap_bound".into(), format_value(v)));
    }
    if args.drought {
        let v = theory::drought_threshold_ratio(args.lambda_base, args.t, args.kappa, args.alpha)?;
        rows.push(("drought_threshold_ratio".into(), format_value(v)));
    }
    if args.budget {
        let v = theory::extra_fp_budget(args.t, args.kappa, args.alpha);
        rows.push(("extra_fp_budget".into(), format_value(v)));
    }
    Ok(rows)
}

struct Reporter {
    quiet: bool,
    verbose: u8,
}

impl Reporter {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn progress(&self) -> impl Fn(u64, u64) + Sync + '_ {
        move |done, total| {
            if self.quiet {
                return;
            }
            let step = if self.verbose > 0 {
                1
            } else {
                (total / 10).max(1)
            };
            if done % step == 0 || done == total {
                eprintln!("replication {done}/{total}");
            }
        }
    }

    fn echo(&self, cfg: &ExperimentConfig) -> Result<()> {
        if !self.quiet {
            eprintln!("# effective configuration\n{}", cfg.to_file().to_toml()?);
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    version: &'a str,
    config: ConfigFile,
    boundaries: &'a [sweep::PhaseBoundary],
}

#[derive(Serialize)]
struct AblationRow {
    wrapper: &'static str,
    mean_fdp: f64,
    se_fdp: f64,
    mean_power: f64,
    se_power: f64,
    mean_regret: f64,
    se_regret: f64,
    mean_dividend: f64,
    virtual_invariance_failures: u64,
    subsumption_violations: u64,
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    write_atomic(&path, bytes)?;
    Ok(path)
}

fn print_written(path: &Path, bytes: &[u8]) {
    println!("{}  {}", sha256_hex(bytes), path.display());
}

fn cmd_run(args: &RunArgs, rep: &Reporter) -> Result<()> {
    let cfg = args.experiment.merged(ConfigFile::default())?.resolve()?;
    rep.echo(&cfg)?;
    let result = run_experiment_with_progress(&cfg, &rep.progress())?;
    let out = write_outputs(&result, &args.out)?;
    println!("{}  {}", out.trajectory_sha256, out.trajectory.display());
    println!("{}  {}", out.summary_sha256, out.summary.display());
    let agg = &result.aggregate;
    rep.info(format!(
        "fdr {:.4} (base {:.4}), power {:.4} (base {:.4}), mean dividend {:.3}",
        agg.actual.fdp.mean,
        agg.base.fdp.mean,
        agg.actual.power.mean,
        agg.base.power.mean,
        agg.dividend.mean
    ));
    Ok(())
}

fn bursty_defaults() -> ConfigFile {
    ConfigFile {
        env: Some(EnvKind::Bursty),
        ..Default::default()
    }
}

fn cmd_sweep(args: &SweepArgs, rep: &Reporter) -> Result<()> {
    let cfg = args.run.experiment.merged(bursty_defaults())?.resolve()?;
    rep.echo(&cfg)?;
    let rhos = if args.rhos.is_empty() {
        sweep::default_rhos()
    } else {
        args.rhos.clone()
    };
    let ratios = if args.ratios.is_empty() {
        sweep::log_grid(args.ratio_min, args.ratio_max, args.ratio_points)?
    } else {
        args.ratios.clone()
    };
    let quiet_cfg = {
        let mut c = cfg.clone();
        c.outputs = Default::default();
        c
    };
    let map = sweep::sweep_phase_map(&quiet_cfg, &rhos, &ratios)?;
    let csv = phase_map_csv(&map)?;
    let path = write_file(&args.run.out, "phase_map.csv", &csv)?;
    print_written(&path, &csv);
    let json = to_json(&SweepSummary {
        version: VERSION,
        config: cfg.to_file(),
        boundaries: &map.boundaries,
    })?;
    let path = write_file(&args.run.out, "phase_map.json", &json)?;
    print_written(&path, &json);
    for b in &map.boundaries {
        rep.info(format!(
            "rho {}: empirical boundary {}, M* {}",
            format_value(b.rho),
            b.empirical.map_or("none".into(), format_value),
            b.m_star.map_or("n/a".into(), format_value)
        ));
    }
    Ok(())
}

fn cmd_pareto(args: &ParetoArgs, rep: &Reporter) -> Result<()> {
    let base = args.run.experiment.merged(bursty_defaults())?.resolve()?;
    rep.echo(&base)?;
    let procedures = if args.procedures.is_empty() {
        vec![base.procedure.kind]
    } else {
        args.procedures.clone()
    };
    let mut cfgs = Vec::new();
    for &p in &procedures {
        for &kappa in &args.kappas {
            let cfg = base
                .clone()
                .with_procedure(p)
                .with_wrapper(base.wrapper.variant, kappa);
            cfg.validate()?;
            cfgs.push(cfg);
        }
    }
    let points = pareto_points(&cfgs)?;
    let csv = pareto_csv(&points)?;
    let path = write_file(&args.run.out, "pareto.csv", &csv)?;
    print_written(&path, &csv);
    Ok(())
}

fn cmd_ablate(args: &RunArgs, rep: &Reporter) -> Result<()> {
    let base = args.experiment.merged(ConfigFile::default())?.resolve()?;
    rep.echo(&base)?;
    let mut rows = Vec::new();
    for variant in [WrapperKind::Domt, WrapperKind::Cr, WrapperKind::DetOffset] {
        let mut cfg = base.clone().with_wrapper(variant, base.wrapper.kappa);
        cfg.outputs.trajectory = format!("{}_{}", variant.name(), base.outputs.trajectory);
        cfg.outputs.summary = format!("{}_{}", variant.name(), base.outputs.summary);
        rep.info(format!("wrapper {}", variant.name()));
        let result = run_experiment_with_progress(&cfg, &rep.progress())?;
        let out = write_outputs(&result, &args.out)?;
        println!("{}  {}", out.trajectory_sha256, out.trajectory.display());
        println!("{}  {}", out.summary_sha256, out.summary.display());
        let agg = &result.aggregate;
        rows.push(AblationRow {
            wrapper: variant.name(),
            mean_fdp: agg.actual.fdp.mean,
            se_fdp: agg.actual.fdp.se,
            mean_power: agg.actual.power.mean,
            se_power: agg.actual.power.se,
            mean_regret: agg.actual.regret.mean,
            se_regret: agg.actual.regret.se,
            mean_dividend: agg.dividend.mean,
            virtual_invariance_failures: agg.virtual_invariance_failures,
            subsumption_violations: agg.subsumption_violations,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Serialize(e.to_string()))?;
    let path = write_file(&args.out, "ablation.csv", &bytes)?;
    print_written(&path, &bytes);
    Ok(())
}

fn cmd_ingest(args: &RunArgs, rep: &Reporter) -> Result<()> {
    let mut merged = args.experiment.merged(ConfigFile::default())?;
    merged.env = Some(EnvKind::File);
    let cfg = merged.resolve()?;
    let crate::environments::EnvironmentSpec::File { path, mapping } = cfg.env.clone() else {
        unreachable!("env forced to file above");
    };
    rep.echo(&cfg)?;
    let ingest = IngestConfig {
        path,
        mapping,
        procedure: cfg.procedure,
        wrapper: cfg.wrapper,
        weights: cfg.weights,
        seed: cfg.seed,
    };
    let (written, summary) = ingest_to_dir(&ingest, &args.out)?;
    let bytes = std::fs::read(&written).map_err(|e| Error::io(&written, e))?;
    print_written(&written, &bytes);
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "steps\t{}", summary.steps);
    let _ = writeln!(stdout, "rejections_base\t{}", summary.rejections_base);
    let _ = writeln!(stdout, "rejections_actual\t{}", summary.rejections_actual);
    if let (Some(b), Some(a)) = (summary.base, summary.actual) {
        let _ = writeln!(stdout, "fdp_base\t{}", format_value(b.fdp()));
        let _ = writeln!(stdout, "fdp_actual\t{}", format_value(a.fdp()));
        let _ = writeln!(stdout, "power_base\t{}", format_value(b.power()));
        let _ = writeln!(stdout, "power_actual\t{}", format_value(a.power()));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let rep = Reporter {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Run(args) => cmd_run(args, &rep),
        Command::Sweep(args) => cmd_sweep(args, &rep),
        Command::Pareto(args) => cmd_pareto(args, &rep),
        Command::Ablate(args) => cmd_ablate(args, &rep),
        Command::Ingest(args) => cmd_ingest(args, &rep),
        Command::Theory(args) => {
            for (k, v) in theory_table(args)? {
                println!("{k}\t{v}");
            }
            Ok(())
        }
    }
}

/// Parses `argv` and runs the chosen subcommand, returning the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
