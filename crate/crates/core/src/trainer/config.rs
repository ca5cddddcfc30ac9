//! Training configuration and its flat `key = value` text form.
//!
//! ```text
//! # comment
//! method = evpo
//! seed = 1
//! env.kind = frozenlake
//! train.group_size = 8
//! intervention.kind = cold_start
//! intervention.steps = 25
//! ```
//!
//! Every key has a default, so a document only lists what differs. Keys may
//! be written without their section when the short name is unambiguous
//! (`ev_threshold` for `train.ev_threshold`). Serializing writes every key,
//! and parsing that output reproduces the config exactly.

use std::collections::BTreeMap;
use std::fmt;

use crate::agent::AgentParams;
use crate::env::{EnvConfig, EnvKind};
use crate::error::{invalid, EvpoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ppo,
    Grpo,
    Evpo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ppo => "ppo",
            Method::Grpo => "grpo",
            Method::Evpo => "evpo",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Some(Method::Ppo),
            "grpo" => Some(Method::Grpo),
            "evpo" => Some(Method::Evpo),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intervention {
    None,
    /// Batch-mean baseline for the first `k` steps, then plain PPO.
    ColdStart(usize),
    /// `k` critic-only steps before training starts.
    CriticWarmup(usize),
    /// Noisy critic reads from `start_step` on.
    NoiseInject {
        sigma: f64,
        start_step: usize,
    },
}

impl Intervention {
    pub fn kind(&self) -> &'static str {
        match self {
            Intervention::None => "none",
            Intervention::ColdStart(_) => "cold_start",
            Intervention::CriticWarmup(_) => "warmup",
            Intervention::NoiseInject { .. } => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    /// Template for every task; `env.seed` is the first layout seed of the pool.
    pub env: EnvConfig,
    pub n_tasks_per_iter: usize,
    pub group_size: usize,
    pub iterations: usize,
    pub ev_threshold: f64,
    pub intervention: Intervention,
    pub seed: u64,
    /// Number of distinct layouts tasks are drawn from.
    pub task_pool: usize,
    pub eval_interval: usize,
    pub val_tasks: usize,
    pub val_rollouts: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub agent: AgentParams,
}

impl TrainConfig {
    /// 16 tasks x 16 rollouts per step over 8 layouts, 200 steps.
    pub fn frozen_lake(method: Method) -> Self {
        Self {
            method,
            env: EnvConfig::frozen_lake(0),
            n_tasks_per_iter: 16,
            group_size: 16,
            iterations: 200,
            ev_threshold: 0.0,
            intervention: Intervention::None,
            seed: 0,
            task_pool: 8,
            eval_interval: 10,
            val_tasks: 32,
            val_rollouts: 16,
            gamma: 1.0,
            lambda: 1.0,
            agent: AgentParams { actor_lr: 1000.0, critic_lr: 1.0, ..AgentParams::default() },
        }
    }

    /// 16 tasks x 8 rollouts per step over 32 layouts, 500 steps.
    pub fn mini_sokoban(method: Method) -> Self {
        Self {
            env: EnvConfig::mini_sokoban(0),
            group_size: 8,
            iterations: 500,
            task_pool: 32,
            eval_interval: 25,
            ..Self::frozen_lake(method)
        }
    }

    /// Built-in configs: `{frozenlake,sokoban}_{ppo,grpo,evpo}`.
    pub fn preset(name: &str) -> Option<Self> {
        let (env, method) = name.rsplit_once('_')?;
        let method = Method::parse(method)?;
        match EnvKind::parse(env)? {
            EnvKind::FrozenLakeSlippery => Some(Self::frozen_lake(method)),
            EnvKind::MiniSokoban => Some(Self::mini_sokoban(method)),
        }
    }

    pub const PRESETS: [&'static str; 6] =
        ["frozenlake_ppo", "frozenlake_grpo", "frozenlake_evpo", "sokoban_ppo", "sokoban_grpo", "sokoban_evpo"];

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.group_size < 2 {
            return Err(invalid(format!("group_size must be at least 2, got {}", self.group_size)));
        }
        for (name, v) in [
            ("n_tasks_per_iter", self.n_tasks_per_iter),
            ("task_pool", self.task_pool),
            ("eval_interval", self.eval_interval),
            ("val_tasks", self.val_tasks),
            ("val_rollouts", self.val_rollouts),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !self.ev_threshold.is_finite() {
            return Err(invalid("ev_threshold must be finite"));
        }
        if self.gamma != 1.0 || self.lambda != 1.0 {
            return Err(invalid("training uses gamma = lambda = 1"));
        }
        if self.env.seed + self.task_pool as u64 > crate::env::MAX_TASK_SEED {
            return Err(invalid("task pool seeds exceed 2^47"));
        }
        match self.intervention {
            Intervention::ColdStart(_) | Intervention::CriticWarmup(_) if self.method != Method::Ppo => {
                Err(invalid(format!("{} requires method ppo", self.intervention.kind())))
            }
            Intervention::NoiseInject { sigma, .. } if !(sigma.is_finite() && sigma >= 0.0) => {
                Err(invalid(format!("noise sigma must be finite and non-negative, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Every key in canonical order.
    pub fn to_text(&self) -> String {
        let (steps, sigma, start) = match self.intervention {
            Intervention::None => (0, 0.0, 1),
            Intervention::ColdStart(k) | Intervention::CriticWarmup(k) => (k, 0.0, 1),
            Intervention::NoiseInject { sigma, start_step } => (0, sigma, start_step),
        };
        let a = &self.agent;
        let e = &self.env;
        let rows: Vec<(&str, String)> = vec![
            ("method", self.method.to_string()),
            ("seed", self.seed.to_string()),
            ("env.kind", e.kind.as_str().to_string()),
            ("env.grid_size", e.grid_size.to_string()),
            ("env.max_steps", e.max_steps.to_string()),
            ("env.hole_count", e.hole_count.to_string()),
            ("env.wall_count", e.wall_count.to_string()),
            ("env.seed", e.seed.to_string()),
            ("train.n_tasks_per_iter", self.n_tasks_per_iter.to_string()),
            ("train.group_size", self.group_size.to_string()),
            ("train.iterations", self.iterations.to_string()),
            ("train.ev_threshold", self.ev_threshold.to_string()),
            ("train.task_pool", self.task_pool.to_string()),
            ("train.eval_interval", self.eval_interval.to_string()),
            ("train.val_tasks", self.val_tasks.to_string()),
            ("train.val_rollouts", self.val_rollouts.to_string()),
            ("train.gamma", self.gamma.to_string()),
            ("train.lambda", self.lambda.to_string()),
            ("train.actor_lr", a.actor_lr.to_string()),
            ("train.critic_lr", a.critic_lr.to_string()),
            ("train.clip_low", a.clip_low.to_string()),
            ("train.clip_high", a.clip_high.to_string()),
            ("train.entropy_coef", a.entropy_coef.to_string()),
            ("train.kl_coef", a.kl_coef.to_string()),
            ("train.epochs", a.epochs.to_string()),
            ("intervention.kind", self.intervention.kind().to_string()),
            ("intervention.steps", steps.to_string()),
            ("intervention.sigma", sigma.to_string()),
            ("intervention.start_step", start.to_string()),
        ];
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses a config document over the built-in defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, None)
    }

    /// Parses `text` on top of `base`. Without a base, defaults come from
    /// the `env.kind` the document names (FrozenLake if absent).
    pub fn parse_with_base(text: &str, base: Option<TrainConfig>) -> Result<Self> {
        let entries = parse_entries(text)?;
        Self::from_entries(entries, base)
    }

    /// Applies `KEY=VALUE` overrides, validating the result.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, o) in overrides.iter().enumerate() {
            let (k, v) = o.split_once('=').ok_or_else(|| EvpoError::Config {
                line: i + 1,
                column: 1,
                message: format!("override {o:?} is not KEY=VALUE"),
            })?;
            let key =
                canonical_key(k.trim()).map_err(|message| EvpoError::Config { line: i + 1, column: 1, message })?;
            entries.push(Entry { key, value: v.trim().to_string(), line: i + 1, column: k.len() + 2 });
        }
        Self::from_entries(entries, Some(self))
    }

    fn from_entries(entries: Vec<Entry>, base: Option<TrainConfig>) -> Result<Self> {
        let mut cfg = match base {
            Some(b) => b,
            None => {
                let kind = match entries.iter().find(|e| e.key == "env.kind") {
                    Some(e) => parse_kind(e)?,
                    None => EnvKind::FrozenLakeSlippery,
                };
                match kind {
                    EnvKind::FrozenLakeSlippery => Self::frozen_lake(Method::Evpo),
                    EnvKind::MiniSokoban => Self::mini_sokoban(Method::Evpo),
                }
            }
        };
        let mut icfg = IntervText::from(cfg.intervention);
        for e in &entries {
            cfg.apply(e, &mut icfg)?;
        }
        cfg.intervention = icfg.build().map_err(|message| {
            let e = entries.iter().rev().find(|e| e.key.starts_with("intervention.")).or(entries.last());
            let (line, column) = e.map_or((1, 1), |e| (e.line, e.column));
            EvpoError::Config { line, column, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry, icfg: &mut IntervText) -> Result<()> {
        let a = &mut self.agent;
        match e.key.as_str() {
            "method" => {
                self.method = Method::parse(&e.value).ok_or_else(|| e.error("method must be ppo, grpo or evpo"))?
            }
            "seed" => self.seed = e.num()?,
            "env.kind" => self.env.kind = parse_kind(e)?,
            "env.grid_size" => self.env.grid_size = e.num()?,
            "env.max_steps" => self.env.max_steps = e.num()?,
            "env.hole_count" => self.env.hole_count = e.num()?,
            "env.wall_count" => self.env.wall_count = e.num()?,
            "env.seed" => self.env.seed = e.num()?,
            "train.n_tasks_per_iter" => self.n_tasks_per_iter = e.num()?,
            "train.group_size" => self.group_size = e.num()?,
            "train.iterations" => self.iterations = e.num()?,
            "train.ev_threshold" => self.ev_threshold = e.num()?,
            "train.task_pool" => self.task_pool = e.num()?,
            "train.eval_interval" => self.eval_interval = e.num()?,
            "train.val_tasks" => self.val_tasks = e.num()?,
            "train.val_rollouts" => self.val_rollouts = e.num()?,
            "train.gamma" => self.gamma = e.num()?,
            "train.lambda" => self.lambda = e.num()?,
            "train.actor_lr" => a.actor_lr = e.num()?,
            "train.critic_lr" => a.critic_lr = e.num()?,
            "train.clip_low" => a.clip_low = e.num()?,
            "train.clip_high" => a.clip_high = e.num()?,
            "train.entropy_coef" => a.entropy_coef = e.num()?,
            "train.kl_coef" => a.kl_coef = e.num()?,
            "train.epochs" => a.epochs = e.num()?,
            "intervention.kind" => icfg.kind = e.value.clone(),
            "intervention.steps" => icfg.steps = e.num()?,
            "intervention.sigma" => icfg.sigma = e.num()?,
            "intervention.start_step" => icfg.start_step = e.num()?,
            other => unreachable!("key {other} passed canonical_key"),
        }
        Ok(())
    }
}

const KEYS: [&str; 29] = [
    "method",
    "seed",
    "env.kind",
    "env.grid_size",
    "env.max_steps",
    "env.hole_count",
    "env.wall_count",
    "env.seed",
    "train.n_tasks_per_iter",
    "train.group_size",
    "train.iterations",
    "train.ev_threshold",
    "train.task_pool",
    "train.eval_interval",
    "train.val_tasks",
    "train.val_rollouts",
    "train.gamma",
    "train.lambda",
    "train.actor_lr",
    "train.critic_lr",
    "train.clip_low",
    "train.clip_high",
    "train.entropy_coef",
    "train.kl_coef",
    "train.epochs",
    "intervention.kind",
    "intervention.steps",
    "intervention.sigma",
    "intervention.start_step",
];

/// Full dotted name for `key`, accepting an unambiguous short form.
fn canonical_key(key: &str) -> std::result::Result<String, String> {
    if KEYS.contains(&key) {
        return Ok(key.to_string());
    }
    let matches: Vec<&str> =
        KEYS.iter().copied().filter(|k| k.rsplit_once('.').is_some_and(|(_, short)| short == key)).collect();
    match matches.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(format!("unknown config key {key:?}")),
        many => Err(format!("ambiguous config key {key:?}: could be {}", many.join(", "))),
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    column: usize,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> EvpoError {
        EvpoError::Config { line: self.line, column: self.column, message: message.into() }
    }

    fn num<T: std::str::FromStr>(&self) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.value.parse().map_err(|err| self.error(format!("bad value {:?} for {}: {err}", self.value, self.key)))
    }
}

fn parse_kind(e: &Entry) -> Result<EnvKind> {
    EnvKind::parse(&e.value).ok_or_else(|| e.error("env.kind must be frozenlake or sokoban"))
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let Some((k, v)) = content.split_once('=') else {
            return Err(EvpoError::Config { line, column: indent + 1, message: "expected KEY = VALUE".into() });
        };
        let key = canonical_key(k.trim()).map_err(|message| EvpoError::Config { line, column: indent + 1, message })?;
        let value_col = k.len() + 1 + (v.len() - v.trim_start().len()) + 1;
        let value = v.trim();
        if value.is_empty() {
            return Err(EvpoError::Config { line, column: value_col, message: format!("{key} has no value") });
        }
        if let Some(prev) = seen.insert(key.clone(), line) {
            return Err(EvpoError::Config {
                line,
                column: indent + 1,
                message: format!("{key} already set on line {prev}"),
            });
        }
        out.push(Entry { key, value: value.to_string(), line, column: value_col });
    }
    Ok(out)
}

/// Intervention fields as written, assembled once every key is read.
struct IntervText {
    kind: String,
    steps: usize,
    sigma: f64,
    start_step: usize,
}

impl From<Intervention> for IntervText {
    fn from(i: Intervention) -> Self {
        let mut t = IntervText { kind: i.kind().to_string(), steps: 0, sigma: 0.0, start_step: 1 };
        match i {
            Intervention::None => {}
            Intervention::ColdStart(k) | Intervention::CriticWarmup(k) => t.steps = k,
            Intervention::NoiseInject { sigma, start_step } => {
                t.sigma = sigma;
                t.start_step = start_step;
            }
        }
        t
    }
}

impl IntervText {
    fn build(&self) -> std::result::Result<Intervention, String> {
        match self.kind.as_str() {
            "none" => Ok(Intervention::None),
            "cold_start" => Ok(Intervention::ColdStart(self.steps)),
            "warmup" => Ok(Intervention::CriticWarmup(self.steps)),
            "noise" => Ok(Intervention::NoiseInject { sigma: self.sigma, start_step: self.start_step.max(1) }),
            other => Err(format!("intervention.kind must be none, cold_start, warmup or noise, got {other:?}")),
        }
    }
}
