//! Command-line front end: argument types, run directories and reports.
//!
//! A run directory holds `manifest.txt` (run fields followed by the full
//! config), `metrics.tsv`, `checkpoint.txt` and `summary.txt`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::agent::TabularAgent;
use crate::env::EnvKind;
use crate::error::{invalid, io_error, EvpoError, Result};
use crate::trainer::{parse_metrics, train_with, Intervention, Method, MetricsRecord, RunSummary, TrainConfig};
use crate::verify::{self, Fault, Suite, VerifyOptions};

pub const MANIFEST: &str = "manifest.txt";
pub const METRICS: &str = "metrics.tsv";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const INITIAL_CHECKPOINT: &str = "initial_checkpoint.txt";
pub const SUMMARY: &str = "summary.txt";
pub const SWEEP_TABLE: &str = "sweep.tsv";

/// Failing verification records echoed to stdout; the report file has all of them.
const MAX_PRINTED_FAILURES: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "evpo", version, about = "Critic vs batch-mean baselines gated by explained variance")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Root for run directories and verification reports.
    #[arg(long, global = true, env = "EVPO_OUT_DIR", default_value = "runs")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Config file or preset name ({frozenlake,sokoban}_{ppo,grpo,evpo}).
    #[arg(long, default_value = "frozenlake_evpo")]
    pub config: String,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Override one config key, e.g. `--set train.iterations=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run.
    Train(RunArgs),
    /// One EVPO run per threshold and seed.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_hyphen_values = true, default_value = "-0.2,-0.1,0,0.1,0.2")]
        thresholds: String,
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
    },
    /// Monte Carlo checks on the Gaussian model.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Continue a checkpoint with noisy critic reads.
    NoiseInject {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        start_step: usize,
        /// Continuation length.
        #[arg(long, default_value_t = 150)]
        steps: usize,
    },
    /// PPO with a cold-start or critic-warmup phase.
    Intervene {
        #[arg(value_enum)]
        kind: InterventionArg,
        /// Phase length (default 25/50 cold start on frozenlake/sokoban, 200 warmup).
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summaries and comparison tables over run dirs, sweeps, metrics files or verify reports.
    Report { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Theorem1,
    Variance,
    Gain,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Theorem1 => Suite::Theorem1,
            SuiteArg::Variance => Suite::Variance,
            SuiteArg::Gain => Suite::Gain,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    FlipEvSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterventionArg {
    ColdStart,
    Warmup,
}

/// What a run directory records about itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub code_version: String,
    pub command: String,
    pub seed: u64,
    pub metrics_path: String,
    pub checkpoint_path: String,
    pub summary_path: String,
    pub initial_checkpoint: Option<String>,
    pub config: TrainConfig,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "run.id = {}\nrun.code_version = {}\nrun.command = {}\nrun.seed = {}\n\
             run.metrics = {}\nrun.checkpoint = {}\nrun.summary = {}\n",
            self.run_id,
            self.code_version,
            self.command,
            self.seed,
            self.metrics_path,
            self.checkpoint_path,
            self.summary_path
        );
        if let Some(p) = &self.initial_checkpoint {
            s.push_str(&format!("run.initial_checkpoint = {p}\n"));
        }
        s.push_str(&self.config.to_text());
        s
    }

    /// `run.*` lines are manifest fields; everything else is the config.
    pub fn parse(text: &str) -> Result<Self> {
        let mut run = BTreeMap::new();
        let mut config = String::new();
        for line in text.lines() {
            match line.trim_start().strip_prefix("run.") {
                Some(rest) => {
                    let (k, v) = rest.split_once('=').ok_or_else(|| invalid(format!("manifest line {line:?}")))?;
                    run.insert(k.trim().to_string(), v.trim().to_string());
                    // Keep line numbers in config errors meaningful.
                    config.push('\n');
                }
                None => {
                    config.push_str(line);
                    config.push('\n');
                }
            }
        }
        let get = |k: &str| run.get(k).cloned().ok_or_else(|| invalid(format!("manifest is missing run.{k}")));
        Ok(Self {
            run_id: get("id")?,
            code_version: get("code_version")?,
            command: get("command")?,
            seed: get("seed")?.parse().map_err(|e| invalid(format!("run.seed: {e}")))?,
            metrics_path: get("metrics")?,
            checkpoint_path: get("checkpoint")?,
            summary_path: get("summary")?,
            initial_checkpoint: run.get("initial_checkpoint").cloned(),
            config: TrainConfig::parse(&config)?,
        })
    }
}

/// Resolves `--config` (file first, then preset) and applies `--seed` and `--set`.
pub fn load_config(args: &RunArgs) -> Result<(TrainConfig, String)> {
    let path = Path::new(&args.config);
    let (base, label) = if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        (TrainConfig::parse(&text)?, label)
    } else if let Some(cfg) = TrainConfig::preset(&args.config) {
        (cfg, args.config.clone())
    } else {
        return Err(invalid(format!(
            "--config {:?} is neither a file nor a preset ({})",
            args.config,
            TrainConfig::PRESETS.join(", ")
        )));
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok((cfg, label))
}

/// Creates `root/base`, or `root/base-2`, `root/base-3`, ... if taken.
pub fn create_run_dir(root: &Path, base: &str) -> Result<(PathBuf, String)> {
    fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
    for n in 1.. {
        let id = if n == 1 { base.to_string() } else { format!("{base}-{n}") };
        let dir = root.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((dir, id)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io_error(&dir, e)),
        }
    }
    unreachable!()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Write-then-rename so a reader never sees half a checkpoint.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, text)?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

/// Trains `config` into a fresh run directory under `root`. Metrics are
/// flushed per step so a failed run keeps everything up to the failure.
pub fn execute_run(
    config: &TrainConfig,
    initial: Option<TabularAgent>,
    root: &Path,
    run_id: &str,
    command: &str,
) -> Result<(PathBuf, RunSummary)> {
    config.validate()?;
    let (dir, run_id) = create_run_dir(root, run_id)?;
    let manifest = RunManifest {
        run_id,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: config.seed,
        metrics_path: METRICS.into(),
        checkpoint_path: CHECKPOINT.into(),
        summary_path: SUMMARY.into(),
        initial_checkpoint: initial.as_ref().map(|_| INITIAL_CHECKPOINT.to_string()),
        config: config.clone(),
    };
    if let Some(agent) = &initial {
        write_file(&dir.join(INITIAL_CHECKPOINT), &agent.to_checkpoint())?;
    }
    write_file(&dir.join(MANIFEST), &manifest.to_text())?;
    let metrics_path = dir.join(METRICS);
    let checkpoint_path = dir.join(CHECKPOINT);
    let file = File::create(&metrics_path).map_err(|e| io_error(&metrics_path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", MetricsRecord::header()).map_err(|e| io_error(&metrics_path, e))?;
    let outcome = train_with(config, initial, &mut |record, agent| {
        writeln!(out, "{}", record.to_line()).and_then(|_| out.flush()).map_err(|e| io_error(&metrics_path, e))?;
        if record.val_success_rate.is_some() {
            write_atomic(&checkpoint_path, &agent.to_checkpoint())?;
        }
        Ok(())
    })?;
    write_atomic(&checkpoint_path, &outcome.agent.to_checkpoint())?;
    write_file(&dir.join(SUMMARY), &outcome.summary.to_text())?;
    Ok((dir, outcome.summary))
}

/// Comma-separated numbers, optionally wrapped in braces.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
    inner
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|e| invalid(format!("bad list entry {x:?}: {e}"))))
        .collect()
}

/// Runs one parsed command. `Ok(false)` means the command ran but a check failed.
pub fn run(cli: Cli) -> Result<bool> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| invalid(format!("--jobs: {e}")))?;
    }
    let out = cli.out;
    match cli.command {
        Command::Train(args) => {
            let (cfg, label) = load_config(&args)?;
            let (dir, summary) = execute_run(&cfg, None, &out, &format!("{label}-s{}", cfg.seed), "train")?;
            print_run(&dir, &summary);
            Ok(true)
        }
        Command::Sweep { run: args, thresholds, seeds } => {
            let (cfg, label) = load_config(&args)?;
            let thresholds: Vec<f64> = parse_list(&thresholds)?;
            let seeds: Vec<u64> = parse_list(&seeds)?;
            if thresholds.is_empty() || seeds.is_empty() {
                return Err(invalid("sweep needs at least one threshold and one seed"));
            }
            if cfg.method != Method::Evpo {
                return Err(invalid("threshold sweeps require method evpo"));
            }
            let (dir, _) = create_run_dir(&out, &format!("{label}-sweep"))?;
            let jobs: Vec<(f64, u64)> = thresholds.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
            let rows = jobs
                .par_iter()
                .map(|&(t, s)| {
                    let c = TrainConfig { ev_threshold: t, seed: s, ..cfg.clone() };
                    execute_run(&c, None, &dir, &format!("tau{t}-s{s}"), "sweep").map(|(_, sum)| (t, s, sum))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut table = String::from("threshold\tseed\tbest_val_success\tbest_val_step\tmean_critic_fraction\n");
            for (t, s, sum) in &rows {
                table.push_str(&format!(
                    "{t}\t{s}\t{}\t{}\t{}\n",
                    sum.best_val_success, sum.best_val_step, sum.mean_critic_fraction
                ));
            }
            write_file(&dir.join(SWEEP_TABLE), &table)?;
            print!("{}", sweep_table(&table)?);
            println!("sweep written to {}", dir.display());
            Ok(true)
        }
        Command::Verify { suite, seed, inject_fault } => {
            let opts = VerifyOptions {
                seed,
                fault: match inject_fault {
                    Some(FaultArg::FlipEvSign) => Fault::FlipEvSign,
                    None => Fault::None,
                },
                ..VerifyOptions::default()
            };
            let outcome = verify::run_suite(suite.into(), &opts)?;
            fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let name = format!(
                "verify-{}.txt",
                suite.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
            );
            let path = out.join(name);
            write_file(&path, &outcome.text)?;
            let mut failures = 0;
            for line in outcome.text.lines() {
                if line.starts_with("suite") {
                    println!("{line}");
                } else if line.starts_with("violation") || line.contains("=false") {
                    failures += 1;
                    if failures <= MAX_PRINTED_FAILURES {
                        println!("{line}");
                    }
                }
            }
            if failures > MAX_PRINTED_FAILURES {
                println!("... {} more failing records", failures - MAX_PRINTED_FAILURES);
            }
            println!("report written to {}", path.display());
            Ok(outcome.passed)
        }
        Command::NoiseInject { run: args, checkpoint, sigma, start_step, steps } => {
            let (cfg, label) = load_config(&args)?;
            let text = fs::read_to_string(&checkpoint).map_err(|e| io_error(&checkpoint, e))?;
            let agent = TabularAgent::from_checkpoint(&text, cfg.agent.clone())?;
            let cfg =
                TrainConfig { iterations: steps, intervention: Intervention::NoiseInject { sigma, start_step }, ..cfg };
            let id = format!("{label}-noise{sigma}-s{}", cfg.seed);
            let (dir, summary) = execute_run(&cfg, Some(agent), &out, &id, "noise-inject")?;
            print_run(&dir, &summary);
            Ok(true)
        }
        Command::Intervene { kind, k, run: args } => {
            let (cfg, label) = load_config(&args)?;
            let (intervention, id) = match kind {
                InterventionArg::ColdStart => {
                    let k = k.unwrap_or(match cfg.env.kind {
                        EnvKind::FrozenLakeSlippery => 25,
                        EnvKind::MiniSokoban => 50,
                    });
                    (Intervention::ColdStart(k), format!("{label}-cold_start{k}-s{}", cfg.seed))
                }
                InterventionArg::Warmup => {
                    let k = k.unwrap_or(200);
                    (Intervention::CriticWarmup(k), format!("{label}-warmup{k}-s{}", cfg.seed))
                }
            };
            let cfg = TrainConfig { method: Method::Ppo, intervention, ..cfg };
            let (dir, summary) = execute_run(&cfg, None, &out, &id, "intervene")?;
            print_run(&dir, &summary);
            Ok(true)
        }
        Command::Report { paths } => {
            print!("{}", report(&paths)?);
            Ok(true)
        }
    }
}

fn print_run(dir: &Path, summary: &RunSummary) {
    println!("run written to {}", dir.display());
    print!("{}", summary.to_text());
}

/// Per-run statistics recomputed from a metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDigest {
    pub label: String,
    pub task: String,
    pub method: String,
    pub steps: usize,
    pub best_val_success: f64,
    pub best_val_step: usize,
    pub final_val_success: f64,
    pub mean_train_success: f64,
    pub mean_critic_fraction: f64,
    /// `(step, gate_critic_fraction)` at up to [`TRAJECTORY_POINTS`] steps.
    pub gate_trajectory: Vec<(usize, f64)>,
    pub ev_trajectory: Vec<(usize, f64)>,
}

pub const TRAJECTORY_POINTS: usize = 10;

fn downsample(records: &[MetricsRecord], f: impl Fn(&MetricsRecord) -> f64) -> Vec<(usize, f64)> {
    let n = records.len();
    if n == 0 {
        return Vec::new();
    }
    let k = TRAJECTORY_POINTS.min(n);
    (0..k).map(|i| &records[(i + 1) * n / k - 1]).map(|r| (r.step, f(r))).collect()
}

impl RunDigest {
    pub fn from_records(label: &str, task: &str, records: &[MetricsRecord]) -> Result<Self> {
        let Some(last) = records.last() else {
            return Err(invalid(format!("{label}: metrics stream is empty")));
        };
        let mut best = (f64::NEG_INFINITY, 0);
        let mut final_val = 0.0;
        for r in records {
            if let Some(v) = r.val_success_rate {
                if v > best.0 {
                    best = (v, r.step);
                }
                final_val = v;
            }
        }
        let n = records.len() as f64;
        Ok(Self {
            label: label.to_string(),
            task: task.to_string(),
            method: last.method.clone(),
            steps: records.len(),
            best_val_success: if best.0.is_finite() { best.0 } else { 0.0 },
            best_val_step: best.1,
            final_val_success: final_val,
            mean_train_success: records.iter().map(|r| r.train_success_rate).sum::<f64>() / n,
            mean_critic_fraction: records.iter().map(|r| r.gate_critic_fraction).sum::<f64>() / n,
            gate_trajectory: downsample(records, |r| r.gate_critic_fraction),
            ev_trajectory: downsample(records, |r| r.batch_ev),
        })
    }

    fn lines(&self) -> String {
        let traj = |t: &[(usize, f64)]| t.iter().map(|(s, v)| format!("{s}:{v:.4}")).collect::<Vec<_>>().join(" ");
        format!(
            "run {}\n  task {} method {} steps {}\n  best_val_success {:.4} at step {}  final_val_success {:.4}\n  \
             mean_train_success {:.4}  mean_critic_fraction {:.4}\n  gate {}\n  batch_ev {}\n",
            self.label,
            self.task,
            self.method,
            self.steps,
            self.best_val_success,
            self.best_val_step,
            self.final_val_success,
            self.mean_train_success,
            self.mean_critic_fraction,
            traj(&self.gate_trajectory),
            traj(&self.ev_trajectory)
        )
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_run(dir: &Path) -> Result<RunDigest> {
    let metrics_path = dir.join(METRICS);
    let records = parse_metrics(&read(&metrics_path)?).map_err(|e| with_path(&metrics_path, e))?;
    let task = match read(&dir.join(MANIFEST)) {
        Ok(text) => RunManifest::parse(&text)?.config.env.kind.as_str().to_string(),
        Err(_) => "unknown".into(),
    };
    RunDigest::from_records(&dir.display().to_string(), &task, &records)
}

fn with_path(path: &Path, e: EvpoError) -> EvpoError {
    EvpoError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Threshold-by-success table from a `sweep.tsv`.
pub fn sweep_table(text: &str) -> Result<String> {
    let mut by_tau: Vec<(f64, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || EvpoError::Config { line: i + 1, column: 1, message: format!("bad sweep row {line:?}") };
        if f.len() < 3 {
            return Err(bad());
        }
        let tau: f64 = f[0].parse().map_err(|_| bad())?;
        let best: f64 = f[2].parse().map_err(|_| bad())?;
        match by_tau.iter_mut().find(|(t, _)| *t == tau) {
            Some((_, v)) => v.push(best),
            None => by_tau.push((tau, vec![best])),
        }
    }
    by_tau.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = format!("{:>10}  {:>5}  {:>14}  {:>8}  {:>8}\n", "threshold", "seeds", "mean_best_val", "min", "max");
    for (tau, v) in &by_tau {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.push_str(&format!("{tau:>10}  {:>5}  {mean:>14.4}  {min:>8.4}  {max:>8.4}\n", v.len()));
    }
    Ok(s)
}

/// Renders the report for `paths`: run summaries, then a method-by-task table.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(invalid("report needs at least one path"));
    }
    let mut out = String::new();
    let mut digests = Vec::new();
    for path in paths {
        if path.is_dir() && path.join(SWEEP_TABLE).is_file() {
            out.push_str(&format!("sweep {}\n", path.display()));
            out.push_str(&sweep_table(&read(&path.join(SWEEP_TABLE))?).map_err(|e| with_path(path, e))?);
        } else if path.is_dir() {
            digests.push(load_run(path)?);
        } else {
            let text = read(path)?;
            if text.starts_with("suite\t") {
                for rec in verify::parse_records(&text)?.iter().filter(|r| r.kind == "suite") {
                    let name = rec.get("name").unwrap_or("?");
                    out.push_str(&format!("verify {name} {}\n", rec.get("result").unwrap_or("?")));
                }
            } else {
                let records = parse_metrics(&text).map_err(|e| with_path(path, e))?;
                digests.push(RunDigest::from_records(&path.display().to_string(), "unknown", &records)?);
            }
        }
    }
    for d in &digests {
        out.push_str(&d.lines());
    }
    if !digests.is_empty() {
        let mut groups: BTreeMap<(String, String), Vec<&RunDigest>> = BTreeMap::new();
        for d in &digests {
            groups.entry((d.task.clone(), d.method.clone())).or_default().push(d);
        }
        out.push_str(&format!(
            "{:<12} {:<6} {:>4} {:>14} {:>13} {:>14}\n",
            "task", "method", "runs", "mean_best_val", "max_best_val", "critic_frac"
        ));
        for ((task, method), ds) in &groups {
            let n = ds.len() as f64;
            out.push_str(&format!(
                "{:<12} {:<6} {:>4} {:>14.4} {:>13.4} {:>14.4}\n",
                task,
                method,
                ds.len(),
                ds.iter().map(|d| d.best_val_success).sum::<f64>() / n,
                ds.iter().map(|d| d.best_val_success).fold(f64::NEG_INFINITY, f64::max),
                ds.iter().map(|d| d.mean_critic_fraction).sum::<f64>() / n,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let m = RunManifest {
            run_id: "frozenlake_evpo-s3".into(),
            code_version: "0.1.0".into(),
            command: "train".into(),
            seed: 3,
            metrics_path: METRICS.into(),
            checkpoint_path: CHECKPOINT.into(),
            summary_path: SUMMARY.into(),
            initial_checkpoint: Some(INITIAL_CHECKPOINT.into()),
            config: TrainConfig { seed: 3, ev_threshold: 0.1, ..TrainConfig::frozen_lake(Method::Evpo) },
        };
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn lists_accept_braces_and_negatives() {
        assert_eq!(parse_list::<f64>("{-0.2,-0.1,0,0.1,0.2}").unwrap(), vec![-0.2, -0.1, 0.0, 0.1, 0.2]);
        assert_eq!(parse_list::<u64>("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_list::<f64>("{}").unwrap().is_empty());
        assert!(parse_list::<u64>("1,x").is_err());
    }

    #[test]
    fn run_dirs_are_unique() {
        let root = tempfile::tempdir().unwrap();
        let (_, a) = create_run_dir(root.path(), "x").unwrap();
        let (_, b) = create_run_dir(root.path(), "x").unwrap();
        assert_eq!((a.as_str(), b.as_str()), ("x", "x-2"));
    }

    #[test]
    fn sweep_table_groups_thresholds() {
        let t = "threshold\tseed\tbest_val_success\n-0.2\t0\t0.5\n0\t0\t0.25\n-0.2\t1\t0.7\n";
        let s = sweep_table(t).unwrap();
        let rows: Vec<&str> = s.lines().skip(1).collect();
        assert!(rows[0].trim_start().starts_with("-0.2") && rows[0].contains("0.6000"), "{s}");
        assert!(rows[1].trim_start().starts_with('0'), "{s}");
        assert!(sweep_table("h\nx\t0\t1\n").is_err());
    }

    #[test]
    fn digest_picks_first_best() {
        let rec = |step, val: Option<f64>| MetricsRecord {
            step,
            method: "ppo".into(),
            per_group_ev: vec![],
            batch_ev: 0.0,
            gate_critic_fraction: 1.0,
            train_success_rate: 0.5,
            actor_grad_norm: 0.0,
            critic_loss: 0.0,
            val_success_rate: val,
            threshold: 0.0,
            adv_var_chosen: 0.0,
            adv_var_rejected: 0.0,
        };
        let recs = vec![rec(1, Some(0.2)), rec(2, None), rec(3, Some(0.4)), rec(4, Some(0.4)), rec(5, Some(0.1))];
        let d = RunDigest::from_records("r", "frozenlake", &recs).unwrap();
        assert_eq!((d.best_val_success, d.best_val_step, d.final_val_success), (0.4, 3, 0.1));
        assert_eq!(d.gate_trajectory.len(), 5);
        assert!(RunDigest::from_records("r", "t", &[]).is_err());
        assert!(report(&[]).is_err());
    }
}
