use std::path::Path;
use std::process::{Command, Output};

use evpo::cli::RunManifest;
use evpo::trainer::{parse_metrics, RunSummary};

const SMALL: [&str; 12] = [
    "--set",
    "iterations=6",
    "--set",
    "eval_interval=3",
    "--set",
    "val_tasks=4",
    "--set",
    "val_rollouts=4",
    "--set",
    "n_tasks_per_iter=4",
    "--set",
    "group_size=4",
];

fn evpo(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpo"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("EVPO_OUT_DIR")
        .output()
        .unwrap()
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn train_twice_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let args = with_small(&["train", "--config", "frozenlake_evpo", "--seed", "1"]);
    assert!(evpo(dir.path(), &args).status.success());
    assert!(evpo(dir.path(), &args).status.success());
    let a = std::fs::read(dir.path().join("frozenlake_evpo-s1/metrics.tsv")).unwrap();
    let b = std::fs::read(dir.path().join("frozenlake_evpo-s1-2/metrics.tsv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(parse_metrics(std::str::from_utf8(&a).unwrap()).unwrap().len(), 6);
    for f in ["manifest.txt", "checkpoint.txt", "summary.txt"] {
        assert!(dir.path().join("frozenlake_evpo-s1").join(f).is_file(), "{f}");
    }
}

#[test]
fn manifest_records_overrides_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let args = with_small(&["train", "--config", "frozenlake_evpo", "--set", "ev_threshold=0.1"]);
    assert!(evpo(dir.path(), &args).status.success());
    let run = dir.path().join("frozenlake_evpo-s0");
    let text = std::fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(text.contains("train.ev_threshold = 0.1"), "{text}");
    let manifest = RunManifest::parse(&text).unwrap();
    assert_eq!(manifest.code_version, env!("CARGO_PKG_VERSION"));
    // The manifest alone reproduces the run.
    let config = dir.path().join("copy.txt");
    std::fs::write(&config, manifest.config.to_text()).unwrap();
    assert!(evpo(dir.path(), &["train", "--config", config.to_str().unwrap()]).status.success());
    assert_eq!(
        std::fs::read(run.join("metrics.tsv")).unwrap(),
        std::fs::read(dir.path().join("copy-s0/metrics.tsv")).unwrap()
    );
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = evpo(dir.path(), &["train", "--set", "train.bogus_key=1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "method = evpo\n\ntrain.iterations = many\n").unwrap();
    let o = evpo(dir.path(), &["train", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3, column 20"), "{}", stderr(&o));
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_evpo"))
        .args(with_small(&["train", "--seed", "4"]))
        .env("EVPO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("frozenlake_evpo-s4/metrics.tsv").is_file());
}

#[test]
fn single_threshold_sweep_matches_train() {
    let dir = tempfile::tempdir().unwrap();
    let o = evpo(dir.path(), &with_small(&["sweep", "--thresholds", "{0}", "--seeds", "2"]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(evpo(dir.path(), &with_small(&["train", "--seed", "2"])).status.success());
    let sweep = dir.path().join("frozenlake_evpo-sweep");
    let table = std::fs::read_to_string(sweep.join("sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let read = |p: &Path| RunSummary::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(read(&sweep.join("tau0-s2/summary.txt")), read(&dir.path().join("frozenlake_evpo-s2/summary.txt")));

    assert!(!evpo(dir.path(), &["sweep", "--thresholds", "{}"]).status.success());
    assert!(!evpo(dir.path(), &["sweep", "--config", "frozenlake_ppo"]).status.success());
}

#[test]
fn verify_gain_reports_minimizers_and_fault_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let o = evpo(dir.path(), &["verify", "gain"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("verify-gain.txt")).unwrap();
    assert!(report.contains("optimal_gain=0.25\tnearest=0.25\targmin=0.25"), "{report}");

    let o = evpo(dir.path(), &["verify", "theorem1", "--inject-fault", "flip-ev-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("violation"));
}

#[test]
fn interventions_and_noise_write_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = evpo(dir.path(), &with_small(&["intervene", "cold-start", "--k", "4", "--config", "frozenlake_ppo"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("frozenlake_ppo-cold_start4-s0/metrics.tsv")).unwrap();
    let records = parse_metrics(&text).unwrap();
    assert!(records[..4].iter().all(|r| r.gate_critic_fraction == 0.0));
    assert!(records[4..].iter().all(|r| r.gate_critic_fraction == 1.0));

    let o = evpo(dir.path(), &with_small(&["intervene", "warmup", "--k", "3", "--config", "frozenlake_ppo"]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(evpo(dir.path(), &with_small(&["intervene", "warmup", "--config", "frozenlake_evpo"])).status.success());

    let ckpt = dir.path().join("frozenlake_ppo-warmup3-s0/checkpoint.txt");
    let args = with_small(&["noise-inject", "--config", "frozenlake_ppo", "--sigma", "3", "--steps", "5"]);
    let mut args: Vec<&str> = args;
    args.extend(["--checkpoint", ckpt.to_str().unwrap()]);
    let o = evpo(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("frozenlake_ppo-noise3-s0");
    assert!(run.join("initial_checkpoint.txt").is_file());
    let manifest = RunManifest::parse(&std::fs::read_to_string(run.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest.config.iterations, 5);

    let o = evpo(dir.path(), &["noise-inject", "--sigma", "1", "--checkpoint", "/nonexistent/ckpt.txt"]);
    assert!(!o.status.success());
}

#[test]
fn report_tables_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in ["frozenlake_ppo", "frozenlake_grpo", "frozenlake_evpo"] {
        assert!(evpo(dir.path(), &with_small(&["train", "--config", cfg])).status.success());
    }
    let runs: Vec<String> = ["ppo", "grpo", "evpo"]
        .iter()
        .map(|m| dir.path().join(format!("frozenlake_{m}-s0")).display().to_string())
        .collect();
    let mut args = vec!["report"];
    args.extend(runs.iter().map(String::as_str));
    let o = evpo(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let table: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("task")).collect();
    assert_eq!(table.len(), 4, "{out}");
    assert!(table[0].contains("mean_best_val"));

    assert!(!evpo(dir.path(), &["report"]).status.success());
    let bad = dir.path().join("bad.tsv");
    let mut text = std::fs::read_to_string(dir.path().join("frozenlake_ppo-s0/metrics.tsv")).unwrap();
    text.push_str("7\tppo\tnot-a-number\n");
    std::fs::write(&bad, text).unwrap();
    let o = evpo(dir.path(), &["report", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}
