//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Pass a substring argument to run only matching criteria, e.g.
//! `cargo test --test acceptance -- determinism`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use domt::environments::EnvironmentSpec;
use domt::harness::config::{AltKind, AltSection, ConfigFile, EnvKind, ExperimentConfig};
use domt::harness::experiment::run_experiment;
use domt::harness::sweep::{log_grid, sweep_phase_map};
use domt::metrics::Estimate;
use domt::procedures::{ProcedureKind, ProcedureSpec};
use domt::sampling::{derive_seed, AltDistribution, RngState};
use domt::theory;
use domt::wrapper::{DomtConfig, Wrapper, WrapperKind};

const ALPHA: f64 = 0.05;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn resolve(f: ConfigFile) -> ExperimentConfig {
    f.resolve().expect("acceptance configuration is valid")
}

fn terminal_only(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.record_stride = cfg.env.horizon().unwrap();
    cfg
}

fn stationary(kind: ProcedureKind, wrapper: WrapperKind, reps: u64) -> ExperimentConfig {
    terminal_only(
        ExperimentConfig::defaults(EnvKind::Stationary)
            .with_procedure(kind)
            .with_wrapper(wrapper, 3.0)
            .with_replications(reps),
    )
}

fn pure_null(t: u64, reps: u64) -> ExperimentConfig {
    terminal_only(resolve(ConfigFile {
        env: Some(EnvKind::Stationary),
        t: Some(t),
        pi0: Some(1.0),
        kappa: Some(3.0),
        replications: Some(reps),
        ..Default::default()
    }))
}

fn linear(slope: f64) -> Option<AltSection> {
    Some(AltSection {
        kind: Some(AltKind::Linear),
        slope: Some(slope),
        ..Default::default()
    })
}

fn subsumption() -> Verdict {
    let horizon = 1112u64;
    let envs = |seed_t: u64| {
        [
            EnvironmentSpec::Stationary {
                t: seed_t,
                pi0: 0.8,
                alt: AltDistribution::Beta { a: 0.05, b: 20.0 },
            },
            EnvironmentSpec::Bursty {
                t: seed_t,
                t0: seed_t / 2,
                pi_post: 0.2,
                alt: AltDistribution::Beta { a: 0.3, b: 15.0 },
            },
            EnvironmentSpec::Drought {
                t: seed_t,
                t0: seed_t / 4,
                k: seed_t / 2,
                pi0: 0.8,
                alt: AltDistribution::LinearDetectability { slope: 5.0 },
            },
        ]
    };
    let mut steps = 0u64;
    let mut violations = 0u64;
    let mut combo = 0u64;
    for kind in ProcedureKind::ALL {
        for env in envs(horizon) {
            for kappa in [0.5, 3.0, 8.0] {
                for variant in [WrapperKind::Domt, WrapperKind::DetOffset] {
                    let seed = derive_seed(2024, combo);
                    combo += 1;
                    let items = env.generate(RngState::with_stream(seed, 0)).unwrap();
                    let base = ProcedureSpec::new(kind, ALPHA).build().unwrap();
                    let cfg = DomtConfig::new(variant, kappa, ALPHA).unwrap();
                    let mut w = Wrapper::new(cfg, base, RngState::with_stream(seed, 1)).unwrap();
                    for item in &items {
                        let rec = w.step(item).unwrap();
                        steps += 1;
                        if rec.delta_base && !rec.delta_actual {
                            violations += 1;
                        }
                    }
                }
            }
        }
    }
    verdict(
        steps >= 100_000 && violations == 0,
        format!("{violations} violations in {steps} steps over {combo} configurations"),
    )
}

fn virtual_invariance() -> Verdict {
    let env = EnvironmentSpec::stationary_default();
    let mut mismatched = Vec::new();
    let mut runs = 0;
    for kind in ProcedureKind::ALL {
        for s in 0..50u64 {
            let seed = derive_seed(7, s);
            let items = env.generate(RngState::with_stream(seed, 0)).unwrap();
            let mut bare = ProcedureSpec::new(kind, ALPHA).build().unwrap();
            let cfg = DomtConfig::new(WrapperKind::Domt, 3.0, ALPHA).unwrap();
            let mut w = Wrapper::new(
                cfg,
                ProcedureSpec::new(kind, ALPHA).build().unwrap(),
                RngState::with_stream(seed, 1),
            )
            .unwrap();
            let identical = items.iter().all(|item| {
                let rec = w.step(item).unwrap();
                let (thr, _) = bare.step(item.p_value);
                rec.lambda_base.to_bits() == thr.to_bits()
            });
            runs += 1;
            if !identical {
                mismatched.push(format!("{kind}/{s}"));
            }
        }
    }
    verdict(
        mismatched.is_empty(),
        format!(
            "{} of {runs} runs diverged {:?}",
            mismatched.len(),
            mismatched
        ),
    )
}

fn stationary_fdr() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in [
        ProcedureKind::Lond,
        ProcedureKind::Lord,
        ProcedureKind::Saffron,
    ] {
        let res = run_experiment(&stationary(kind, WrapperKind::Domt, 200)).unwrap();
        let fdr = res.aggregate.actual.fdp;
        pass &= fdr.mean <= ALPHA + 0.01;
        parts.push(format!("{kind} {:.5} (se {:.5})", fdr.mean, fdr.se));
    }
    verdict(pass, format!("mean FDP {} vs limit 0.06", parts.join(", ")))
}

fn exploration_budget() -> Verdict {
    let res = run_experiment(&pure_null(4096, 500)).unwrap();
    let extra = res.aggregate.extra_false_positives;
    let budget = theory::extra_fp_budget(4096, 3.0, ALPHA);
    verdict(
        extra.upper(3.0) <= budget,
        format!(
            "mean V_extra {:.4} + 3*se {:.4} = {:.4} vs budget {:.4}",
            extra.mean,
            3.0 * extra.se,
            extra.upper(3.0),
            budget
        ),
    )
}

fn regret_gap() -> Verdict {
    let res = run_experiment(&stationary(ProcedureKind::Lond, WrapperKind::Domt, 500)).unwrap();
    let gap = res.aggregate.regret_gap;
    let bound = theory::regret_gap_bound(5000, 1.0, 3.0, ALPHA);
    verdict(
        gap.upper(3.0) <= bound,
        format!(
            "mean gap {:.4} + 3*se {:.4} = {:.4} vs bound {:.4}",
            gap.mean,
            3.0 * gap.se,
            gap.upper(3.0),
            bound
        ),
    )
}

fn sqrt_t_recovery() -> Verdict {
    let dividend_at = |t: u64| {
        let cfg = terminal_only(resolve(ConfigFile {
            env: Some(EnvKind::TwoPhase),
            t: Some(t),
            alt: linear(5.0),
            procedure: Some(ProcedureKind::Lond),
            kappa: Some(3.0),
            replications: Some(300),
            ..Default::default()
        }));
        run_experiment(&cfg).unwrap().aggregate.dividend
    };
    let small = dividend_at(2000);
    let large = dividend_at(8000);
    let ratio = large.mean / small.mean;
    verdict(
        (1.6..=2.5).contains(&ratio),
        format!(
            "S(2000) {:.3} (se {:.3}), S(8000) {:.3} (se {:.3}), ratio {:.4} vs [1.6, 2.5]",
            small.mean, small.se, large.mean, large.se, ratio
        ),
    )
}

fn cold_start_boundary() -> Verdict {
    let cfg = resolve(ConfigFile {
        env: Some(EnvKind::Bursty),
        t: Some(4000),
        pi_post: Some(0.8),
        alt: linear(5.0),
        replications: Some(200),
        ..Default::default()
    });
    let reference =
        theory::cold_start_tax(&theory::BurstyParams::new(0.8, 5.0, 0.25).unwrap()).unwrap();
    let ratios = log_grid(0.1, 100.0, 25).unwrap();
    let map = sweep_phase_map(&cfg, &[0.25, 0.5], &ratios).unwrap();
    let mut pass = (reference - 1.8).abs() < 1e-12;
    let mut parts = vec![format!("M*(0.25) = {reference:.6}")];
    for b in &map.boundaries {
        let m_star = b.m_star.unwrap();
        let ok = b
            .empirical
            .is_some_and(|x| x >= m_star / 3.0 && x <= 3.0 * m_star);
        pass &= ok;
        parts.push(format!(
            "rho {}: boundary {} vs M* {:.4}",
            b.rho,
            b.empirical.map_or("none".to_owned(), |x| format!("{x:.4}")),
            m_star
        ));
    }
    verdict(pass, parts.join("; "))
}

fn fdp_high_probability() -> Verdict {
    let horizon = 4096;
    let delta = 0.1;
    let res = run_experiment(&pure_null(horizon, 1000)).unwrap();
    let violations = res
        .outcomes
        .iter()
        .filter(|o| {
            let term = theory::fdp_inflation_term(horizon, 3.0, ALPHA, delta, o.actual.r).unwrap();
            o.actual.fdp() > o.base.fdp() + term
        })
        .count();
    let frac = violations as f64 / res.outcomes.len() as f64;
    verdict(
        frac <= delta + 0.02,
        format!(
            "{violations} of {} paths violate (fraction {frac:.4} vs limit {:.2})",
            res.outcomes.len(),
            delta + 0.02
        ),
    )
}

fn ablation_separation() -> Verdict {
    let invariance = |variant| {
        let mut cfg = stationary(ProcedureKind::Lond, variant, 50);
        cfg.seed = 11;
        run_experiment(&cfg)
            .unwrap()
            .aggregate
            .virtual_invariance_failures
    };
    let cr_failures = invariance(WrapperKind::Cr);
    let domt_failures = invariance(WrapperKind::Domt);

    let cr = run_experiment(&stationary(ProcedureKind::Lond, WrapperKind::Cr, 200)).unwrap();
    let domt = run_experiment(&stationary(ProcedureKind::Lond, WrapperKind::Domt, 200)).unwrap();
    let cr_fdr = cr.aggregate.actual.fdp;
    let domt_fdr = domt.aggregate.actual.fdp;
    let paired: Vec<f64> = cr
        .outcomes
        .iter()
        .zip(&domt.outcomes)
        .map(|(c, d)| c.actual.fdp() - d.actual.fdp())
        .collect();
    let diff = Estimate::from_samples(&paired);
    let safety = cr_fdr.mean >= domt_fdr.lower(2.0);
    verdict(
        cr_failures >= 1 && domt_failures == 0 && safety,
        format!(
            "invariance failures cr {cr_failures}/50, domt {domt_failures}/50; \
             mean FDP cr {:.5} vs domt {:.5} - 2*se {:.5} = {:.5} (paired diff {:.5}, se {:.5})",
            cr_fdr.mean,
            domt_fdr.mean,
            2.0 * domt_fdr.se,
            domt_fdr.lower(2.0),
            diff.mean,
            diff.se
        ),
    )
}

fn run_cli(config: &Path, out: &Path) -> (Vec<u8>, Vec<u8>, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_domt"))
        .args(["--quiet", "run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    (
        std::fs::read(out.join("trajectory.csv")).unwrap(),
        std::fs::read(out.join("summary.json")).unwrap(),
        String::from_utf8(output.stdout).unwrap(),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "stationary.toml",
            "env = \"stationary\"\nreplications = 20\nprocedure = \"saffron\"\n",
        ),
        (
            "bursty.json",
            r#"{"env": "bursty", "replications": 20, "wrapper": "cr", "procedure": "addis", "seed": 9}"#,
        ),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, text) in configs {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let a = run_cli(&path, &dir.path().join(format!("{name}.a")));
        let b = run_cli(&path, &dir.path().join(format!("{name}.b")));
        let same = a.0 == b.0 && a.1 == b.1;
        let digests = |s: &str| {
            s.lines()
                .map(|l| l.split_whitespace().next().unwrap().to_owned())
                .collect::<Vec<_>>()
        };
        let same_digests = digests(&a.2) == digests(&b.2);
        pass &= same && same_digests && !a.0.is_empty();
        parts.push(format!(
            "{name}: csv {} bytes, identical {same}, digests identical {same_digests}",
            a.0.len()
        ));
    }
    verdict(pass, parts.join("; "))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "pathwise subsumption", subsumption),
        (2, "virtual invariance", virtual_invariance),
        (3, "stationary FDR inheritance", stationary_fdr),
        (4, "exploration tax budget", exploration_budget),
        (5, "regret gap bound", regret_gap),
        (6, "sqrt(T) discovery recovery", sqrt_t_recovery),
        (7, "cold-start boundary", cold_start_boundary),
        (8, "high-probability FDP bound", fdp_high_probability),
        (9, "ablation separation", ablation_separation),
        (10, "determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected: Vec<&Criterion> = criteria
        .iter()
        .filter(|(n, name, _)| {
            filters.is_empty()
                || filters
                    .iter()
                    .any(|f| name.contains(f.as_str()) || n.to_string() == *f)
        })
        .collect();

    let mut failed = Vec::new();
    for (n, name, check) in &selected {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {n:>2} {:<4} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(*n);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        selected.len() - failed.len(),
        selected.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
