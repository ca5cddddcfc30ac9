//! The training loop: rollouts, per-group advantages, one actor and one
//! critic update per iteration, and the intervention variants.
//!
//! Tasks are drawn with replacement from a fixed pool of `task_pool`
//! layouts starting at `env.seed`. A tabular agent cannot transfer between
//! maps, so validation replays the pool's layouts (task `i` uses layout
//! `i mod task_pool`) with rollout streams that training never touches.

pub mod config;
pub mod metrics;

use rand::Rng;
use rayon::prelude::*;

pub use config::{Intervention, Method, TrainConfig};
pub use metrics::{parse_metrics, MetricsRecord};

use crate::advantage::{
    batch_mean_advantages, evpo_advantages, grpo_advantages, ppo_advantages, AdvantageSet, ModeVariances, RolloutGroup,
    Trajectory,
};
use crate::agent::{NoisyValues, TabularAgent};
use crate::env::{reset, rollout_from, solver, EnvState};
use crate::error::{EvpoError, Result};
use crate::seed::{self, tag};
use crate::stats::{ev_from_variances, population_variance, Gate};

/// Start states for every layout in the pool.
#[derive(Debug, Clone)]
pub struct TaskPool {
    starts: Vec<EnvState>,
}

impl TaskPool {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        let starts = (0..config.task_pool as u64)
            .map(|i| reset(&config.env.with_seed(config.env.seed + i)))
            .collect::<Result<_>>()?;
        Ok(Self { starts })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn start(&self, i: usize) -> &EnvState {
        &self.starts[i % self.starts.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub best_val_success: f64,
    pub best_val_step: usize,
    pub final_val_success: f64,
    /// Mean training success over the steps that updated the actor.
    pub auc_train_success: f64,
    pub mean_critic_fraction: f64,
    /// Exact success of the final policy, averaged like validation.
    pub final_exact_success: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        format!(
            "steps = {}\nbest_val_success = {}\nbest_val_step = {}\nfinal_val_success = {}\n\
             auc_train_success = {}\nmean_critic_fraction = {}\nfinal_exact_success = {}\n",
            self.steps,
            self.best_val_success,
            self.best_val_step,
            self.final_val_success,
            self.auc_train_success,
            self.mean_critic_fraction,
            self.final_exact_success
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| EvpoError::Config {
                line: i + 1,
                column: 1,
                message: "expected KEY = VALUE".into(),
            })?;
            map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let get = |key: &str| -> Result<f64> {
            let (line, v) = map.get(key).ok_or_else(|| EvpoError::Config {
                line: 0,
                column: 0,
                message: format!("summary is missing {key}"),
            })?;
            v.parse().map_err(|e| EvpoError::Config { line: *line, column: 1, message: format!("{key}: {e}") })
        };
        Ok(Self {
            steps: get("steps")? as usize,
            best_val_success: get("best_val_success")?,
            best_val_step: get("best_val_step")? as usize,
            final_val_success: get("final_val_success")?,
            auc_train_success: get("auc_train_success")?,
            mean_critic_fraction: get("mean_critic_fraction")?,
            final_exact_success: get("final_exact_success")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    pub agent: TabularAgent,
    pub summary: RunSummary,
}

/// Runs `config` from a fresh agent.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(config, None, &mut |_, _| Ok(()))
}

/// Runs `config` from `initial` (or a fresh agent), handing every record to
/// `sink` together with the updated agent as soon as it exists. Errors carry the failing step.
pub fn train_with(
    config: &TrainConfig,
    initial: Option<TabularAgent>,
    sink: &mut dyn FnMut(&MetricsRecord, &TabularAgent) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let pool = TaskPool::new(config)?;
    let mut agent = match initial {
        Some(mut a) => {
            a.params = config.agent.clone();
            a
        }
        None => TabularAgent::new(config.agent.clone())?,
    };
    let warmup = match config.intervention {
        Intervention::CriticWarmup(k) => k,
        _ => 0,
    };
    let total = config.iterations + warmup;
    let mut records = Vec::with_capacity(total);
    for step in 1..=total {
        let wrap = |source: EvpoError| EvpoError::Training { step, source: Box::new(source) };
        let phase = if step <= warmup { Phase::Warmup(step as u64) } else { Phase::Train((step - warmup) as u64) };
        let record = train_step(config, &pool, &mut agent, step, phase, step == total).map_err(wrap)?;
        sink(&record, &agent).map_err(wrap)?;
        records.push(record);
    }
    let summary = summarize(config, &pool, &agent, &records, warmup);
    Ok(TrainOutcome { records, agent, summary })
}

/// Warmup steps draw from their own streams, so step `j` after a warmup
/// sees the same tasks and rollout noise as step `j` of a plain run.
#[derive(Debug, Clone, Copy)]
enum Phase {
    Warmup(u64),
    Train(u64),
}

impl Phase {
    fn stream_index(self) -> u64 {
        match self {
            Phase::Warmup(j) => (1 << 40) | j,
            Phase::Train(j) => j,
        }
    }
}

fn rollout_group(agent: &TabularAgent, start: &EnvState, m: usize, rng: &mut impl Rng) -> Result<Vec<Trajectory>> {
    let policy = |s: &EnvState| agent.act_distribution(s.key()).to_vec();
    (0..m).map(|_| rollout_from(start, policy, rng)).collect()
}

fn advantages_for(config: &TrainConfig, group: &RolloutGroup, step: usize) -> AdvantageSet {
    match (config.method, config.intervention) {
        (Method::Ppo, Intervention::ColdStart(k)) if step <= k => batch_mean_advantages(group),
        (Method::Ppo, _) => ppo_advantages(group),
        (Method::Grpo, _) => grpo_advantages(group),
        (Method::Evpo, _) => evpo_advantages(group, config.ev_threshold),
    }
}

fn train_step(
    config: &TrainConfig,
    pool: &TaskPool,
    agent: &mut TabularAgent,
    step: usize,
    phase: Phase,
    last: bool,
) -> Result<MetricsRecord> {
    let s = phase.stream_index();
    let update_actor = matches!(phase, Phase::Train(_));
    let mut task_rng = seed::stream(config.seed, &[tag::TASKS, s]);
    let tasks: Vec<usize> = (0..config.n_tasks_per_iter).map(|_| task_rng.random_range(0..pool.len())).collect();

    let sigma = match config.intervention {
        Intervention::NoiseInject { sigma, start_step } if step >= start_step => sigma,
        _ => 0.0,
    };
    let reader = NoisyValues::new(agent, sigma)?;
    let groups: Vec<RolloutGroup> = tasks
        .par_iter()
        .enumerate()
        .map(|(g, &task)| {
            let mut rng = seed::stream(config.seed, &[tag::ROLLOUT, s, g as u64]);
            let start = pool.start(task);
            let trajectories = rollout_group(agent, start, config.group_size, &mut rng)?;
            let mut noise = seed::stream(config.seed, &[tag::NOISE, s, g as u64]);
            let trajectories = trajectories
                .into_iter()
                .map(|t| {
                    let values = t.states.iter().map(|&k| reader.read(k, &mut noise)).collect();
                    t.with_values(values)
                })
                .collect::<Result<Vec<_>>>()?;
            RolloutGroup::new(start.layout.seed, trajectories)
        })
        .collect::<Result<_>>()?;

    let advantages: Vec<AdvantageSet> = groups.iter().map(|g| advantages_for(config, g, step)).collect();

    let mut weighted = (0.0, 0.0, 0.0);
    let mut critic_groups = 0;
    for (g, a) in groups.iter().zip(&advantages) {
        let w = g.total_steps() as f64;
        let (chosen, rejected) = ModeVariances::of(g).split(a.mode);
        weighted.0 += w * chosen;
        weighted.1 += w * rejected;
        weighted.2 += w;
        if a.mode == Gate::CriticMode {
            critic_groups += 1;
        }
    }

    let (returns, values): (Vec<f64>, Vec<f64>) =
        groups.iter().map(RolloutGroup::pooled).fold((Vec::new(), Vec::new()), |(mut r, mut v), (gr, gv)| {
            r.extend(gr);
            v.extend(gv);
            (r, v)
        });
    let residuals: Vec<f64> = returns.iter().zip(&values).map(|(g, v)| g - v).collect();
    let batch_ev = ev_from_variances(population_variance(&residuals), population_variance(&returns));

    let n_traj = (config.n_tasks_per_iter * config.group_size) as f64;
    let successes = groups.iter().flat_map(|g| &g.trajectories).filter(|t| t.succeeded()).count();

    let actor_grad_norm = if update_actor {
        let old = agent.snapshot();
        agent.ppo_update(&groups, &advantages, &old)?.actor_grad_norm
    } else {
        0.0
    };
    let critic_loss = agent.critic_update(&groups)?.critic_loss;

    let eval_due = match phase {
        Phase::Train(j) => j % config.eval_interval as u64 == 0 || last,
        Phase::Warmup(_) => false,
    };
    let val_success_rate = eval_due.then(|| validate(config, pool, agent, s));

    Ok(MetricsRecord {
        step,
        method: config.method.to_string(),
        per_group_ev: advantages.iter().map(|a| a.diagnostics.ev).collect(),
        batch_ev,
        gate_critic_fraction: critic_groups as f64 / config.n_tasks_per_iter as f64,
        train_success_rate: successes as f64 / n_traj,
        actor_grad_norm,
        critic_loss,
        val_success_rate: val_success_rate.transpose()?,
        threshold: config.ev_threshold,
        adv_var_chosen: weighted.0 / weighted.2,
        adv_var_rejected: weighted.1 / weighted.2,
    })
}

/// Success rate over `val_tasks x val_rollouts` fresh episodes.
pub fn validate(config: &TrainConfig, pool: &TaskPool, agent: &TabularAgent, step: u64) -> Result<f64> {
    let wins: Vec<usize> = (0..config.val_tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = seed::stream(config.seed, &[tag::VALIDATION, step, task as u64]);
            let trajectories = rollout_group(agent, pool.start(task), config.val_rollouts, &mut rng)?;
            Ok(trajectories.iter().filter(|t| t.succeeded()).count())
        })
        .collect::<Result<_>>()?;
    Ok(wins.iter().sum::<usize>() as f64 / (config.val_tasks * config.val_rollouts) as f64)
}

/// Exact success of `agent`'s policy averaged over the validation tasks.
pub fn exact_success(config: &TrainConfig, pool: &TaskPool, agent: &TabularAgent) -> f64 {
    let per_layout: Vec<f64> = (0..pool.len().min(config.val_tasks))
        .into_par_iter()
        .map(|i| {
            solver::policy_success(pool.start(i), |s| agent.act_distribution(s.key()).to_vec())
                .expect("softmax rows are valid distributions")
        })
        .collect();
    let total: f64 = (0..config.val_tasks).map(|t| per_layout[t % per_layout.len()]).sum();
    total / config.val_tasks as f64
}

fn summarize(
    config: &TrainConfig,
    pool: &TaskPool,
    agent: &TabularAgent,
    records: &[MetricsRecord],
    warmup: usize,
) -> RunSummary {
    let mut best = (f64::NEG_INFINITY, 0);
    let mut last_val = 0.0;
    for r in records {
        if let Some(v) = r.val_success_rate {
            if v > best.0 {
                best = (v, r.step);
            }
            last_val = v;
        }
    }
    let trained = &records[warmup.min(records.len())..];
    let mean = |f: fn(&MetricsRecord) -> f64| {
        if trained.is_empty() {
            0.0
        } else {
            trained.iter().map(f).sum::<f64>() / trained.len() as f64
        }
    };
    RunSummary {
        steps: records.len(),
        best_val_success: if best.0.is_finite() { best.0 } else { 0.0 },
        best_val_step: best.1,
        final_val_success: last_val,
        auc_train_success: mean(|r| r.train_success_rate),
        mean_critic_fraction: mean(|r| r.gate_critic_fraction),
        final_exact_success: exact_success(config, pool, agent),
    }
}

/// PPO with the batch-mean baseline for the first `k` steps.
pub fn run_cold_start(config: &TrainConfig, k: usize) -> Result<TrainOutcome> {
    train(&TrainConfig { method: Method::Ppo, intervention: Intervention::ColdStart(k), ..config.clone() })
}

/// PPO after `k` critic-only steps on the initial policy.
pub fn run_warmup(config: &TrainConfig, k: usize) -> Result<TrainOutcome> {
    train(&TrainConfig { method: Method::Ppo, intervention: Intervention::CriticWarmup(k), ..config.clone() })
}

/// Continues `checkpoint` for `config.iterations` steps with noisy critic
/// reads from `start_step` on.
pub fn run_noise_injection(
    config: &TrainConfig,
    checkpoint: TabularAgent,
    sigma: f64,
    start_step: usize,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig { intervention: Intervention::NoiseInject { sigma, start_step }, ..config.clone() };
    train_with(&cfg, Some(checkpoint), &mut |_, _| Ok(()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub seed: u64,
    pub summary: RunSummary,
}

/// One EVPO run per `(threshold, seed)`, all else fixed.
pub fn sweep_threshold(base: &TrainConfig, thresholds: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    if thresholds.is_empty() || seeds.is_empty() {
        return Err(crate::error::invalid("sweep needs at least one threshold and one seed"));
    }
    if base.method != Method::Evpo {
        return Err(crate::error::invalid("threshold sweeps require method evpo"));
    }
    let jobs: Vec<(f64, u64)> = thresholds.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    jobs.into_par_iter()
        .map(|(threshold, seed)| {
            let cfg = TrainConfig { ev_threshold: threshold, seed, ..base.clone() };
            Ok(SweepRow { threshold, seed, summary: train(&cfg)?.summary })
        })
        .collect()
}
