use std::path::Path;
use std::process::{Command, Output};

fn domt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domt"))
        .args(args)
        .env_remove("DOMT_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn digests(o: &Output) -> Vec<String> {
    stdout(o)
        .lines()
        .map(|l| l.split_whitespace().next().unwrap().to_owned())
        .collect()
}

#[test]
fn theory_prints_tax() {
    let o = domt(&[
        "theory", "--tax", "--pi", "0.8", "--mu", "5", "--rho", "0.25",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "cold_start_tax\t1.8");
}

#[test]
fn theory_prints_every_calculator() {
    let o = domt(&[
        "theory",
        "--tax",
        "--constants",
        "--fdp-term",
        "--regret-gap",
        "--drought",
        "--budget",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in [
        "cold_start_tax\t1.8",
        "c1\t0.5",
        "c2\t0.9",
        "regret_gap_bound\t9.6",
        "extra_fp_budget\t9.6",
        "fdp_inflation_term",
        "drought_threshold_ratio",
    ] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn missing_config_is_validation_error() {
    let o = domt(&["run", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.cfg"));
}

#[test]
fn invalid_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        domt(&["run", "--alpha", "2", "--out", out]).status.code(),
        Some(1)
    );
    assert_eq!(
        domt(&["run", "--procedure", "bh", "--out", out])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        domt(&["theory", "--tax", "--rho", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(domt(&[]).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_domt"))
        .args(["-q", "run", "--replications", "1", "--out", out])
        .env("DOMT_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DOMT_WORKERS"));
}

#[test]
fn unwritable_output_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = domt(&[
        "-q",
        "run",
        "--t",
        "100",
        "--replications",
        "1",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn version_and_help() {
    let o = domt(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains(concat!("v", env!("CARGO_PKG_VERSION"))));
    for sub in ["run", "sweep", "pareto", "ablate", "theory", "ingest"] {
        let o = domt(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(stdout(&o).contains("--"), "{sub}");
    }
}

#[test]
fn run_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "env = \"bursty\"\nt = 2000\nreplications = 16\n").unwrap();
    let run = |out: &str, workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_domt"))
            .args(["-q", "run", "--config", config.to_str().unwrap(), "--out"])
            .arg(dir.path().join(out))
            .env("DOMT_WORKERS", workers)
            .output()
            .unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert!(a.status.success() && b.status.success());
    assert_eq!(digests(&a), digests(&b));
    assert_eq!(digests(&a).len(), 2);
}

#[test]
fn flags_override_config_in_echo() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"t": 300, "kappa": 5.0, "replications": 2}"#).unwrap();
    let out = dir.path().join("o");
    let o = domt(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--kappa",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("kappa = 1.5"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["kappa"], 1.5);
    assert_eq!(summary["config"]["t"], 300);
}

fn only_files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn sweep_pareto_ablate_write_inside_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let common = ["--t", "600", "--replications", "8"];

    let mut args = vec![
        "-q",
        "sweep",
        "--rhos",
        "0.25,0.5",
        "--ratios",
        "0.5,2,8",
        "--alt-kind",
        "linear",
        "--out",
        out_s,
    ];
    args.extend(common);
    assert!(domt(&args).status.success());
    let mut args = vec![
        "-q",
        "pareto",
        "--kappas",
        "0,3",
        "--procedures",
        "lond,lord",
        "--out",
        out_s,
    ];
    args.extend(common);
    assert!(domt(&args).status.success());
    let mut args = vec!["-q", "ablate", "--out", out_s];
    args.extend(common);
    assert!(domt(&args).status.success());

    assert_eq!(
        only_files_in(&out),
        [
            "ablation.csv",
            "cr_summary.json",
            "cr_trajectory.csv",
            "det_offset_summary.json",
            "det_offset_trajectory.csv",
            "domt_summary.json",
            "domt_trajectory.csv",
            "pareto.csv",
            "phase_map.csv",
            "phase_map.json",
        ]
    );
    assert_eq!(only_files_in(dir.path()), ["out"]);

    let phase = std::fs::read_to_string(out.join("phase_map.csv")).unwrap();
    assert_eq!(phase.lines().count(), 1 + 6);
    assert!(phase.lines().next().unwrap().ends_with("m_star"));
    let pareto = std::fs::read_to_string(out.join("pareto.csv")).unwrap();
    assert_eq!(pareto.lines().count(), 1 + 6);
    assert!(pareto.contains("lord+domt(kappa=3)"));
}

#[test]
fn ingest_streams_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.txt");
    std::fs::write(&input, "0.5\n0.001\n").unwrap();
    let out = dir.path().join("out");
    let o = domt(&[
        "-q",
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("steps\t2"));
    let decisions = std::fs::read_to_string(out.join("decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 3);
    assert!(decisions.starts_with("t,p_value,lambda_base,xi,lambda_actual,delta_base,delta_actual"));

    std::fs::write(&input, "0.5\n0.1\n1.5\n").unwrap();
    let o = domt(&[
        "-q",
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
