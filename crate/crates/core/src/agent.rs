//! Tabular softmax actor and tabular critic.
//!
//! Both tables are keyed by [`StateKey`] and grow as states are visited.
//! Reads of a state that was never updated see uniform logits and value 0
//! without touching the tables, so rollouts can share an immutable agent.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::advantage::{AdvantageSet, RolloutGroup, StateKey};
use crate::env::NUM_ACTIONS;
use crate::error::{invalid, EvpoError, Result};

/// Optimizer settings shared by the actor and the critic.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub actor_lr: f64,
    /// Zero freezes the critic.
    pub critic_lr: f64,
    pub clip_low: f64,
    pub clip_high: f64,
    pub entropy_coef: f64,
    /// Weight of the KL(old || new) penalty.
    pub kl_coef: f64,
    /// Gradient passes over the batch per update.
    pub epochs: usize,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            actor_lr: 0.05,
            critic_lr: 0.1,
            clip_low: 0.2,
            clip_high: 0.2,
            entropy_coef: 0.0,
            kl_coef: 0.0,
            epochs: 1,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and non-negative, got {v}")))
            }
        };
        if !(self.actor_lr.is_finite() && self.actor_lr > 0.0) {
            return Err(invalid(format!("actor_lr must be positive, got {}", self.actor_lr)));
        }
        nonneg("critic_lr", self.critic_lr)?;
        nonneg("entropy_coef", self.entropy_coef)?;
        nonneg("kl_coef", self.kl_coef)?;
        for (name, c) in [("clip_low", self.clip_low), ("clip_high", self.clip_high)] {
            if !(c > 0.0 && c < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {c}")));
            }
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Diagnostics from one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateReport {
    /// L2 norm of the surrogate gradient before the first pass.
    pub actor_grad_norm: f64,
    /// Mean squared error of the critic before its step.
    pub critic_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// One policy-gradient sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStep {
    pub state: StateKey,
    pub action: usize,
    pub advantage: f64,
}

/// Pairs every step of every group with its advantage.
pub fn policy_steps(groups: &[RolloutGroup], advantages: &[AdvantageSet]) -> Result<Vec<PolicyStep>> {
    if groups.len() != advantages.len() {
        return Err(invalid(format!("{} groups but {} advantage sets", groups.len(), advantages.len())));
    }
    let mut steps = Vec::new();
    for (i, (g, a)) in groups.iter().zip(advantages).enumerate() {
        if !a.matches_shape(g) {
            return Err(invalid(format!("advantage set {i} does not match its group's shape")));
        }
        for (t, adv) in g.trajectories.iter().zip(&a.per_step) {
            for ((&state, &action), &advantage) in t.states.iter().zip(&t.actions).zip(adv) {
                if action >= NUM_ACTIONS {
                    return Err(invalid(format!("action {action} out of range")));
                }
                steps.push(PolicyStep { state, action, advantage });
            }
        }
    }
    Ok(steps)
}

pub fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.map(|l| (l - max).exp());
    let z: f64 = p.iter().sum();
    for x in &mut p {
        *x /= z;
    }
    p
}

const UNIFORM: [f64; NUM_ACTIONS] = [1.0 / NUM_ACTIONS as f64; NUM_ACTIONS];

/// Frozen copy of the policy taken before an update.
#[derive(Debug, Clone)]
pub struct PolicySnapshot {
    probs: HashMap<StateKey, [f64; NUM_ACTIONS]>,
}

impl PolicySnapshot {
    pub fn distribution(&self, key: StateKey) -> [f64; NUM_ACTIONS] {
        self.probs.get(&key).copied().unwrap_or(UNIFORM)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgent {
    pub params: AgentParams,
    index: HashMap<StateKey, usize>,
    keys: Vec<StateKey>,
    logits: Vec<[f64; NUM_ACTIONS]>,
    values: Vec<f64>,
}

impl TabularAgent {
    pub fn new(params: AgentParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, index: HashMap::new(), keys: Vec::new(), logits: Vec::new(), values: Vec::new() })
    }

    pub fn num_states(&self) -> usize {
        self.keys.len()
    }

    fn slot(&mut self, key: StateKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.keys.len();
        self.index.insert(key, i);
        self.keys.push(key);
        self.logits.push([0.0; NUM_ACTIONS]);
        self.values.push(0.0);
        i
    }

    pub fn logits(&self, key: StateKey) -> [f64; NUM_ACTIONS] {
        self.index.get(&key).map_or([0.0; NUM_ACTIONS], |&i| self.logits[i])
    }

    pub fn set_logits(&mut self, key: StateKey, logits: [f64; NUM_ACTIONS]) {
        let i = self.slot(key);
        self.logits[i] = logits;
    }

    /// Clean critic read.
    pub fn value(&self, key: StateKey) -> f64 {
        self.index.get(&key).map_or(0.0, |&i| self.values[i])
    }

    pub fn set_value(&mut self, key: StateKey, v: f64) {
        let i = self.slot(key);
        self.values[i] = v;
    }

    pub fn act_distribution(&self, key: StateKey) -> [f64; NUM_ACTIONS] {
        self.index.get(&key).map_or(UNIFORM, |&i| softmax(&self.logits[i]))
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot { probs: self.index.iter().map(|(&k, &i)| (k, softmax(&self.logits[i]))).collect() }
    }

    /// Critic reads perturbed by fresh `N(0, sigma^2)` noise.
    pub fn with_value_noise(&self, sigma: f64) -> Result<NoisyValues<'_>> {
        NoisyValues::new(self, sigma)
    }

    /// Step-mean clipped surrogate plus the optional entropy bonus and KL
    /// penalty, evaluated at the current logits.
    pub fn surrogate_objective(&self, steps: &[PolicyStep], old: &PolicySnapshot) -> f64 {
        let (lo, hi) = (1.0 - self.params.clip_low, 1.0 + self.params.clip_high);
        let mut total = 0.0;
        for s in steps {
            let pi = self.act_distribution(s.state);
            let pi_old = old.distribution(s.state);
            let ratio = pi[s.action] / pi_old[s.action];
            total += (ratio * s.advantage).min(ratio.clamp(lo, hi) * s.advantage);
            total += self.params.entropy_coef * entropy(&pi);
            total -= self.params.kl_coef * kl(&pi_old, &pi);
        }
        total / steps.len().max(1) as f64
    }

    /// Analytic gradient of [`Self::surrogate_objective`] with respect to
    /// every logit, in state-visit order, plus the mean ratio and clip
    /// fraction.
    pub fn surrogate_gradient(
        &self,
        steps: &[PolicyStep],
        old: &PolicySnapshot,
    ) -> (Vec<(StateKey, [f64; NUM_ACTIONS])>, f64, f64) {
        let (lo, hi) = (1.0 - self.params.clip_low, 1.0 + self.params.clip_high);
        let scale = 1.0 / steps.len().max(1) as f64;
        let mut order: HashMap<StateKey, usize> = HashMap::new();
        let mut grads: Vec<(StateKey, [f64; NUM_ACTIONS])> = Vec::new();
        let (mut ratio_sum, mut clipped) = (0.0, 0usize);
        for s in steps {
            let pi = self.act_distribution(s.state);
            let pi_old = old.distribution(s.state);
            let ratio = pi[s.action] / pi_old[s.action];
            ratio_sum += ratio;
            let saturated = (s.advantage > 0.0 && ratio > hi) || (s.advantage < 0.0 && ratio < lo);
            if ratio > hi || ratio < lo {
                clipped += 1;
            }
            let slot = *order.entry(s.state).or_insert_with(|| {
                grads.push((s.state, [0.0; NUM_ACTIONS]));
                grads.len() - 1
            });
            let g = &mut grads[slot].1;
            let h = entropy(&pi);
            for b in 0..NUM_ACTIONS {
                let indicator = if b == s.action { 1.0 } else { 0.0 };
                if !saturated {
                    g[b] += scale * s.advantage * ratio * (indicator - pi[b]);
                }
                if pi[b] > 0.0 {
                    g[b] -= scale * self.params.entropy_coef * pi[b] * (pi[b].ln() + h);
                }
                g[b] += scale * self.params.kl_coef * (pi_old[b] - pi[b]);
            }
        }
        let n = steps.len().max(1) as f64;
        (grads, ratio_sum / n, clipped as f64 / n)
    }

    /// Gradient ascent on the clipped surrogate over every step of every
    /// group. `old` must be taken before this iteration's first update.
    pub fn ppo_update(
        &mut self,
        groups: &[RolloutGroup],
        advantages: &[AdvantageSet],
        old: &PolicySnapshot,
    ) -> Result<UpdateReport> {
        let steps = policy_steps(groups, advantages)?;
        let mut report = UpdateReport::default();
        for epoch in 0..self.params.epochs {
            let (grads, mean_ratio, clip_fraction) = self.surrogate_gradient(&steps, old);
            if epoch == 0 {
                report.actor_grad_norm = grads.iter().flat_map(|(_, g)| g.iter()).map(|x| x * x).sum::<f64>().sqrt();
                report.mean_ratio = mean_ratio;
                report.clip_fraction = clip_fraction;
            }
            let lr = self.params.actor_lr;
            for (key, g) in grads {
                let i = self.slot(key);
                for (l, d) in self.logits[i].iter_mut().zip(g) {
                    *l += lr * d;
                }
            }
        }
        Ok(report)
    }

    /// One gradient step on the step-mean squared error between the critic
    /// and observed returns. Runs whatever baseline the actor used.
    pub fn critic_update(&mut self, groups: &[RolloutGroup]) -> Result<UpdateReport> {
        if groups.is_empty() {
            return Err(invalid("critic update needs at least one group"));
        }
        let mut order: HashMap<StateKey, usize> = HashMap::new();
        let mut grads: Vec<(StateKey, f64)> = Vec::new();
        let mut loss = 0.0;
        let mut count = 0usize;
        for t in groups.iter().flat_map(|g| &g.trajectories) {
            for &s in &t.states {
                let err = self.value(s) - t.terminal_return;
                loss += err * err;
                count += 1;
                let slot = *order.entry(s).or_insert_with(|| {
                    grads.push((s, 0.0));
                    grads.len() - 1
                });
                grads[slot].1 += err;
            }
        }
        let scale = 2.0 * self.params.critic_lr / count as f64;
        if self.params.critic_lr > 0.0 {
            for (key, g) in grads {
                let i = self.slot(key);
                self.values[i] -= scale * g;
            }
        }
        Ok(UpdateReport { critic_loss: loss / count as f64, ..UpdateReport::default() })
    }

    /// Text checkpoint:
    ///
    /// ```text
    /// evpo-agent 1
    /// states <n> actions 4
    /// <key> <logit_0> <logit_1> <logit_2> <logit_3> <value>   (n rows)
    /// ```
    ///
    /// Reals use the shortest representation that round-trips exactly.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("evpo-agent 1\nstates {} actions {NUM_ACTIONS}\n", self.keys.len());
        for (i, key) in self.keys.iter().enumerate() {
            let _ = write!(out, "{key}");
            for l in self.logits[i] {
                let _ = write!(out, " {l}");
            }
            let _ = writeln!(out, " {}", self.values[i]);
        }
        out
    }

    pub fn from_checkpoint(text: &str, params: AgentParams) -> Result<Self> {
        let bad = |line: usize, msg: String| EvpoError::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines();
        if lines.next() != Some("evpo-agent 1") {
            return Err(bad(1, "missing 'evpo-agent 1' header".into()));
        }
        let dims: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let n = match dims.as_slice() {
            ["states", n, "actions", a] if a.parse() == Ok(NUM_ACTIONS) => {
                n.parse::<usize>().map_err(|e| bad(2, format!("state count: {e}")))?
            }
            _ => return Err(bad(2, format!("expected 'states <n> actions {NUM_ACTIONS}'"))),
        };
        let mut agent = Self::new(params)?;
        for (row, line) in lines.enumerate() {
            let lineno = row + 3;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != NUM_ACTIONS + 2 {
                return Err(bad(lineno, format!("expected {} fields, got {}", NUM_ACTIONS + 2, fields.len())));
            }
            let key: StateKey = fields[0].parse().map_err(|e| bad(lineno, format!("state key: {e}")))?;
            let mut reals = [0.0; NUM_ACTIONS + 1];
            for (x, f) in reals.iter_mut().zip(&fields[1..]) {
                *x = f.parse().map_err(|e| bad(lineno, format!("{f:?}: {e}")))?;
            }
            if agent.index.contains_key(&key) {
                return Err(bad(lineno, format!("duplicate state {key}")));
            }
            let i = agent.slot(key);
            agent.logits[i].copy_from_slice(&reals[..NUM_ACTIONS]);
            agent.values[i] = reals[NUM_ACTIONS];
        }
        if agent.num_states() != n {
            return Err(EvpoError::Checkpoint(format!(
                "header declares {n} states but {} rows follow",
                agent.num_states()
            )));
        }
        Ok(agent)
    }
}

fn entropy(p: &[f64; NUM_ACTIONS]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn kl(p: &[f64; NUM_ACTIONS], q: &[f64; NUM_ACTIONS]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Critic view whose every read adds independent Gaussian noise. The
/// underlying table is untouched.
#[derive(Debug, Clone, Copy)]
pub struct NoisyValues<'a> {
    agent: &'a TabularAgent,
    noise: Option<Normal<f64>>,
}

impl<'a> NoisyValues<'a> {
    pub fn new(agent: &'a TabularAgent, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!("noise sigma must be finite and non-negative, got {sigma}")));
        }
        // sigma = 0 draws nothing, so the rng stream matches a clean run.
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma checked above"));
        Ok(Self { agent, noise })
    }

    pub fn read<R: Rng + ?Sized>(&self, key: StateKey, rng: &mut R) -> f64 {
        let v = self.agent.value(key);
        match &self.noise {
            Some(n) => v + n.sample(rng),
            None => v,
        }
    }
}
