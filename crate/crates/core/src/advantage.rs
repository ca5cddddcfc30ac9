//! Advantage estimators for a rollout group: critic baseline, normalized
//! group baseline, GAE, and the explained-variance gate between the first
//! two.
//!
//! Under terminal-only reward and `gamma = 1` every estimator has the form
//! `A[m][t] = G[m] - b[m][t]`; they differ only in the baseline `b`.
//!
//! Explained variance for a group is pooled over every (trajectory, step)
//! pair: residuals `G[m] - V(s[m][t])` against returns `G[m]` replicated per
//! step. All trajectories in a group start from the same state, so the
//! first-step values alone would carry no cross-trajectory signal.

use crate::error::{invalid, Result};
use crate::stats::{ev_from_variances, mean, population_variance, BatchDiagnostics, Gate};

/// Opaque tabular state identifier.
pub type StateKey = u64;

/// Added to the group std before dividing, so uniform-return groups map to
/// zero advantages instead of NaN.
pub const GRPO_STD_EPS: f64 = 1e-8;

/// One episode with terminal-only reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateKey>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Critic reads `V(s_t)`, one per state.
    pub values: Vec<f64>,
    pub terminal_return: f64,
}

impl Trajectory {
    pub fn new(states: Vec<StateKey>, actions: Vec<usize>, rewards: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(invalid("trajectory must contain at least one step"));
        }
        if actions.len() != n || rewards.len() != n || values.len() != n {
            return Err(invalid(format!(
                "trajectory field lengths differ: states {n}, actions {}, rewards {}, values {}",
                actions.len(),
                rewards.len(),
                values.len()
            )));
        }
        if rewards[..n - 1].iter().any(|&r| r != 0.0) {
            return Err(invalid("only the final step may carry a reward"));
        }
        let terminal_return = rewards[n - 1];
        Ok(Self { states, actions, rewards, values, terminal_return })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Replaces the critic reads, keeping everything else.
    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.states.len() {
            return Err(invalid(format!("expected {} values, got {}", self.states.len(), values.len())));
        }
        self.values = values;
        Ok(self)
    }

    pub fn succeeded(&self) -> bool {
        self.terminal_return > 0.0
    }
}

/// `M >= 2` trajectories rolled out from the same task.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub task_seed: u64,
    pub trajectories: Vec<Trajectory>,
}

impl RolloutGroup {
    pub fn new(task_seed: u64, trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.len() < 2 {
            return Err(invalid(format!(
                "a rollout group needs at least two trajectories, got {}",
                trajectories.len()
            )));
        }
        let start = trajectories[0].states[0];
        if trajectories.iter().any(|t| t.states[0] != start) {
            return Err(invalid("trajectories in a group must share the initial state"));
        }
        Ok(Self { task_seed, trajectories })
    }

    pub fn returns(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.terminal_return).collect()
    }

    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Returns replicated per step and the matching critic reads.
    pub fn pooled(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.total_steps();
        let mut returns = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for t in &self.trajectories {
            returns.extend(std::iter::repeat_n(t.terminal_return, t.len()));
            values.extend_from_slice(&t.values);
        }
        (returns, values)
    }
}

/// Per-step advantages for every trajectory of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    pub per_step: Vec<Vec<f64>>,
    /// Baseline actually used.
    pub mode: Gate,
    pub diagnostics: BatchDiagnostics,
}

impl AdvantageSet {
    /// Population variance over every (trajectory, step) entry.
    pub fn pooled_variance(&self) -> f64 {
        let flat: Vec<f64> = self.per_step.iter().flatten().copied().collect();
        population_variance(&flat)
    }

    pub fn matches_shape(&self, group: &RolloutGroup) -> bool {
        self.per_step.len() == group.trajectories.len()
            && self.per_step.iter().zip(&group.trajectories).all(|(a, t)| a.len() == t.len())
    }
}

/// Pooled explained variance of the group's critic reads, gated at `threshold`.
pub fn group_diagnostics(group: &RolloutGroup, threshold: f64) -> BatchDiagnostics {
    let (returns, values) = group.pooled();
    let residuals: Vec<f64> = returns.iter().zip(&values).map(|(g, v)| g - v).collect();
    let residual_var = population_variance(&residuals);
    let return_var = population_variance(&returns);
    let ev = ev_from_variances(residual_var, return_var);
    let traj_returns = group.returns();
    BatchDiagnostics {
        ev,
        return_mean: mean(&traj_returns),
        return_std: population_variance(&traj_returns).sqrt(),
        residual_var,
        return_var,
        gate: Gate::select(ev, threshold),
    }
}

fn map_steps(group: &RolloutGroup, f: impl Fn(&Trajectory, usize) -> f64) -> Vec<Vec<f64>> {
    group.trajectories.iter().map(|t| (0..t.len()).map(|i| f(t, i)).collect()).collect()
}

/// `A[m][t] = G[m] - V(s[m][t])`.
pub fn ppo_advantages(group: &RolloutGroup) -> AdvantageSet {
    AdvantageSet {
        per_step: map_steps(group, |t, i| t.terminal_return - t.values[i]),
        mode: Gate::CriticMode,
        diagnostics: group_diagnostics(group, 0.0),
    }
}

/// `A[m][t] = G[m] - mean(G)`, no std normalization.
pub fn batch_mean_advantages(group: &RolloutGroup) -> AdvantageSet {
    let g_bar = mean(&group.returns());
    AdvantageSet {
        per_step: map_steps(group, |t, _| t.terminal_return - g_bar),
        mode: Gate::BatchMeanMode,
        diagnostics: group_diagnostics(group, 0.0),
    }
}

/// `A[m][t] = (G[m] - mean(G)) / (std(G) + eps)` on every step.
pub fn grpo_advantages(group: &RolloutGroup) -> AdvantageSet {
    let returns = group.returns();
    let g_bar = mean(&returns);
    let scale = population_variance(&returns).sqrt() + GRPO_STD_EPS;
    AdvantageSet {
        per_step: map_steps(group, |t, _| (t.terminal_return - g_bar) / scale),
        mode: Gate::BatchMeanMode,
        diagnostics: group_diagnostics(group, 0.0),
    }
}

/// Backward GAE recursion with the value after the final step taken as 0.
pub fn gae_advantages(group: &RolloutGroup, gamma: f64, lambda: f64) -> Result<AdvantageSet> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("gamma and lambda must lie in [0, 1], got {gamma} and {lambda}")));
    }
    let per_step = group
        .trajectories
        .iter()
        .map(|t| {
            let n = t.len();
            let mut out = vec![0.0; n];
            let mut running = 0.0;
            for i in (0..n).rev() {
                let next_value = if i + 1 < n { t.values[i + 1] } else { 0.0 };
                let delta = t.rewards[i] + gamma * next_value - t.values[i];
                running = delta + gamma * lambda * running;
                out[i] = running;
            }
            out
        })
        .collect();
    Ok(AdvantageSet { per_step, mode: Gate::CriticMode, diagnostics: group_diagnostics(group, 0.0) })
}

/// Critic advantages when pooled EV exceeds `threshold`, unnormalized
/// batch-mean advantages otherwise. Never mixes modes within a group.
pub fn evpo_advantages(group: &RolloutGroup, threshold: f64) -> AdvantageSet {
    let diagnostics = group_diagnostics(group, threshold);
    let mut set = match diagnostics.gate {
        Gate::CriticMode => ppo_advantages(group),
        Gate::BatchMeanMode => batch_mean_advantages(group),
    };
    set.diagnostics = diagnostics;
    set
}

/// Advantage variance under each baseline for the same rollouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeVariances {
    pub critic: f64,
    pub batch_mean: f64,
}

impl ModeVariances {
    pub fn of(group: &RolloutGroup) -> Self {
        Self {
            critic: ppo_advantages(group).pooled_variance(),
            batch_mean: batch_mean_advantages(group).pooled_variance(),
        }
    }

    /// `(chosen, rejected)` for a gate decision.
    pub fn split(&self, gate: Gate) -> (f64, f64) {
        match gate {
            Gate::CriticMode => (self.critic, self.batch_mean),
            Gate::BatchMeanMode => (self.batch_mean, self.critic),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(g: f64, values: &[f64]) -> Trajectory {
        let n = values.len();
        let mut rewards = vec![0.0; n];
        rewards[n - 1] = g;
        let states: Vec<StateKey> = (0..n as u64).collect();
        Trajectory::new(states, vec![0; n], rewards, values.to_vec()).unwrap()
    }

    fn group(trajs: Vec<Trajectory>) -> RolloutGroup {
        RolloutGroup::new(0, trajs).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn trajectory_invariants() {
        assert!(Trajectory::new(vec![], vec![], vec![], vec![]).is_err());
        assert!(Trajectory::new(vec![0, 1], vec![0], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(Trajectory::new(vec![0, 1], vec![0, 0], vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        let t = traj(1.0, &[0.2, 0.5]);
        assert_eq!(t.terminal_return, 1.0);
    }

    #[test]
    fn group_invariants() {
        assert!(RolloutGroup::new(0, vec![traj(1.0, &[0.0])]).is_err());
        let mut other = traj(1.0, &[0.0, 0.0]);
        other.states[0] = 99;
        assert!(RolloutGroup::new(0, vec![traj(1.0, &[0.0, 0.0]), other]).is_err());
    }

    #[test]
    fn ppo_examples() {
        let g = group(vec![traj(1.0, &[0.2, 0.5, 0.7]), traj(0.0, &[0.0, 0.0, 0.0])]);
        let a = ppo_advantages(&g);
        assert!(close(&a.per_step[0], &[0.8, 0.5, 0.3]));
        assert_eq!(a.per_step[1], vec![0.0; 3]);
        assert_eq!(a.mode, Gate::CriticMode);
        let perfect = group(vec![traj(1.0, &[1.0, 1.0]), traj(1.0, &[1.0, 1.0])]);
        assert!(ppo_advantages(&perfect).per_step.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn grpo_examples() {
        let g = group([1.0, 0.0, 0.0, 1.0].iter().map(|&r| traj(r, &[0.0, 0.0])).collect());
        let a = grpo_advantages(&g);
        let firsts: Vec<f64> = a.per_step.iter().map(|s| s[0]).collect();
        assert!(firsts.iter().zip([1.0, -1.0, -1.0, 1.0]).all(|(x, y)| (x - y).abs() < 1e-7));
        assert!(a.per_step.iter().all(|s| s[0] == s[1]));

        let uniform = group((0..4).map(|_| traj(1.0, &[0.3])).collect());
        assert!(grpo_advantages(&uniform).per_step.iter().flatten().all(|&x| x == 0.0));

        let pair = group(vec![traj(1.0, &[0.0]), traj(0.0, &[0.0])]);
        let a = grpo_advantages(&pair);
        assert!((a.per_step[0][0] - 1.0).abs() < 1e-7 && (a.per_step[1][0] + 1.0).abs() < 1e-7);
    }

    #[test]
    fn gae_examples() {
        let g = group(vec![traj(1.0, &[0.2, 0.5, 0.7]), traj(0.0, &[0.0, 0.0, 0.0])]);
        let a = gae_advantages(&g, 1.0, 1.0).unwrap();
        assert!(close(&a.per_step[0], &[0.8, 0.5, 0.3]));
        // lambda = 0: one-step TD residuals 0.3, 0.2, 0.3
        let td = gae_advantages(&g, 1.0, 0.0).unwrap();
        assert!(close(&td.per_step[0], &[0.3, 0.2, 0.3]));
        let zero = group(vec![traj(0.0, &[0.0, 0.0]), traj(0.0, &[0.0, 0.0])]);
        for (gamma, lambda) in [(0.9, 0.5), (1.0, 0.0), (0.0, 1.0)] {
            let a = gae_advantages(&zero, gamma, lambda).unwrap();
            assert!(a.per_step.iter().flatten().all(|&x| x == 0.0));
        }
        assert!(gae_advantages(&g, 1.1, 1.0).is_err());
    }

    #[test]
    fn evpo_examples() {
        let perfect = group(vec![traj(1.0, &[1.0, 1.0]), traj(0.0, &[0.0, 0.0])]);
        let a = evpo_advantages(&perfect, 0.0);
        assert_eq!(a.diagnostics.ev, 1.0);
        assert_eq!(a.mode, Gate::CriticMode);
        assert!(a.per_step.iter().flatten().all(|&x| x == 0.0));

        let constant = group(vec![traj(1.0, &[0.5, 0.5]), traj(0.0, &[0.5, 0.5])]);
        let a = evpo_advantages(&constant, 0.0);
        assert_eq!(a.diagnostics.ev, 0.0);
        assert_eq!(a.mode, Gate::BatchMeanMode);
        assert_eq!(a.per_step, vec![vec![0.5, 0.5], vec![-0.5, -0.5]]);

        // anti-correlated critic
        let anti = group(vec![traj(1.0, &[0.2, 0.4]), traj(0.0, &[0.6, 0.8])]);
        let a = evpo_advantages(&anti, 0.0);
        assert!(a.diagnostics.ev < 0.0);
        assert_eq!(a.mode, Gate::BatchMeanMode);
    }

    #[test]
    fn zero_initialized_critic_routes_to_batch_mean() {
        let g = group(
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
                .iter()
                .enumerate()
                .map(|(i, &r)| traj(r, &vec![0.0; 1 + i % 3]))
                .collect(),
        );
        let a = evpo_advantages(&g, 0.0);
        assert_eq!(a.diagnostics.ev, 0.0);
        assert_eq!(a.mode, Gate::BatchMeanMode);
    }

    fn arb_group() -> impl Strategy<Value = RolloutGroup> {
        let arb_traj = (prop_oneof![Just(0.0), Just(1.0), -0.1f64..1.0], proptest::collection::vec(-1.0f64..1.5, 1..8))
            .prop_map(|(g, v)| traj(g, &v));
        proptest::collection::vec(arb_traj, 2..10).prop_map(group)
    }

    proptest! {
        #[test]
        fn gae_telescopes_to_ppo(g in arb_group()) {
            let gae = gae_advantages(&g, 1.0, 1.0).unwrap();
            let ppo = ppo_advantages(&g);
            for (a, b) in gae.per_step.iter().flatten().zip(ppo.per_step.iter().flatten()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn evpo_is_one_mode_or_the_other(g in arb_group(), tau in -0.3f64..0.3) {
            let e = evpo_advantages(&g, tau);
            prop_assert!(e.matches_shape(&g));
            let expected = match e.mode {
                Gate::CriticMode => ppo_advantages(&g).per_step,
                Gate::BatchMeanMode => batch_mean_advantages(&g).per_step,
            };
            prop_assert_eq!(&e.per_step, &expected);
            prop_assert_eq!(e.mode, Gate::select(e.diagnostics.ev, tau));
        }

        #[test]
        fn grpo_is_positive_rescale_of_batch_mean(g in arb_group()) {
            let returns = g.returns();
            prop_assume!(population_variance(&returns) > 1e-6);
            let grpo = grpo_advantages(&g);
            let bm = batch_mean_advantages(&g);
            let scale = population_variance(&returns).sqrt() + GRPO_STD_EPS;
            for (a, b) in grpo.per_step.iter().flatten().zip(bm.per_step.iter().flatten()) {
                prop_assert!((a * scale - b).abs() < 1e-12);
                prop_assert_eq!(a.signum() == b.signum() || *b == 0.0, true);
            }
        }

        #[test]
        fn batch_mean_advantages_sum_to_zero(g in arb_group()) {
            let bm = batch_mean_advantages(&g);
            let s: f64 = bm.per_step.iter().map(|s| s[0]).sum();
            prop_assert!(s.abs() < 1e-10);
        }

        #[test]
        fn gate_picks_lower_variance_at_zero_threshold(g in arb_group()) {
            let e = evpo_advantages(&g, 0.0);
            let (chosen, rejected) = ModeVariances::of(&g).split(e.mode);
            prop_assert!(chosen <= rejected * (1.0 + 1e-9) + 1e-15, "{chosen} > {rejected}");
        }
    }
}
