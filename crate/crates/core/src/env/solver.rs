//! Exact finite-horizon success probabilities by memoized dynamic
//! programming over `(agent, box, step)`.

use std::collections::HashMap;

use super::{check_distribution, EnvState, Pos, NUM_ACTIONS};
use crate::error::Result;

type Node = (Pos, Option<Pos>, usize);

fn node(s: &EnvState) -> Node {
    (s.agent_pos, s.aux_pos, s.step_count)
}

fn action_value(s: &EnvState, a: usize, value: &mut impl FnMut(&EnvState) -> Result<f64>) -> Result<f64> {
    let mut q = 0.0;
    for (p, next) in s.transitions(a)? {
        q += p * value(&next)?;
    }
    Ok(q)
}

struct Optimal {
    memo: HashMap<Node, f64>,
}

impl Optimal {
    fn value(&mut self, s: &EnvState) -> Result<f64> {
        if s.done {
            return Ok(s.terminal_reward.unwrap_or(0.0));
        }
        if let Some(&v) = self.memo.get(&node(s)) {
            return Ok(v);
        }
        let mut best: f64 = 0.0;
        for a in 0..NUM_ACTIONS {
            best = best.max(action_value(s, a, &mut |n| self.value(n))?);
        }
        self.memo.insert(node(s), best);
        Ok(best)
    }
}

/// Probability that the best policy reaches reward 1 from `start` within the
/// remaining step budget.
pub fn optimal_success(start: &EnvState) -> f64 {
    Optimal { memo: HashMap::new() }.value(start).expect("transitions from a live state are always valid")
}

/// An action achieving [`optimal_success`] from `state`. Ties go to the
/// lowest index.
pub fn optimal_action(state: &EnvState) -> Result<usize> {
    let mut solver = Optimal { memo: HashMap::new() };
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..NUM_ACTIONS {
        let q = action_value(state, a, &mut |n| solver.value(n))?;
        if q > best.1 {
            best = (a, q);
        }
    }
    Ok(best.0)
}

struct Evaluation<P> {
    policy: P,
    memo: HashMap<Node, f64>,
}

impl<P: FnMut(&EnvState) -> Vec<f64>> Evaluation<P> {
    fn value(&mut self, s: &EnvState) -> Result<f64> {
        if s.done {
            return Ok(s.terminal_reward.unwrap_or(0.0));
        }
        if let Some(&v) = self.memo.get(&node(s)) {
            return Ok(v);
        }
        let probs = (self.policy)(s);
        check_distribution(&probs)?;
        let mut v = 0.0;
        for (a, &pa) in probs.iter().enumerate() {
            if pa > 0.0 {
                v += pa * action_value(s, a, &mut |n| self.value(n))?;
            }
        }
        self.memo.insert(node(s), v);
        Ok(v)
    }
}

/// Exact success probability of a stochastic `policy` from `start`. The
/// policy may only depend on the agent and box positions and the step.
pub fn policy_success<P>(start: &EnvState, policy: P) -> Result<f64>
where
    P: FnMut(&EnvState) -> Vec<f64>,
{
    Evaluation { policy, memo: HashMap::new() }.value(start)
}
