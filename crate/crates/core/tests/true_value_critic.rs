//! PPO against a critic frozen at the uniform policy's true values.

use std::collections::HashMap;

use evpo::advantage::{ppo_advantages, RolloutGroup, StateKey};
use evpo::agent::TabularAgent;
use evpo::env::{rollout_from, solver, EnvState, NUM_ACTIONS};
use evpo::seed;
use evpo::trainer::{exact_success, train_with, Method, TaskPool, TrainConfig};

const UNIFORM: [f64; NUM_ACTIONS] = [0.25; NUM_ACTIONS];

/// Occupancy-weighted success probability of the uniform policy per state
/// key. The table has no time index, so this is the best constant per key.
fn uniform_values(starts: &[&EnvState]) -> HashMap<StateKey, f64> {
    let mut mass: HashMap<StateKey, (f64, f64)> = HashMap::new();
    for start in starts {
        let mut frontier: HashMap<(StateKey, usize), (EnvState, f64)> = HashMap::new();
        frontier.insert((start.key(), 0), ((*start).clone(), 1.0));
        while !frontier.is_empty() {
            let mut next: HashMap<(StateKey, usize), (EnvState, f64)> = HashMap::new();
            for (state, p) in frontier.into_values() {
                let v = solver::policy_success(&state, |_| UNIFORM.to_vec()).unwrap();
                let e = mass.entry(state.key()).or_default();
                e.0 += p;
                e.1 += p * v;
                for (a, &pa) in UNIFORM.iter().enumerate() {
                    for (q, s) in state.transitions(a).unwrap() {
                        if !s.done {
                            let slot = next.entry((s.key(), s.step_count)).or_insert((s, 0.0));
                            slot.1 += p * pa * q;
                        }
                    }
                }
            }
            frontier = next;
        }
    }
    mass.into_iter().map(|(k, (p, pv))| (k, pv / p)).collect()
}

#[test]
fn frozen_true_values_give_return_minus_value_and_learning() {
    let mut config = TrainConfig::frozen_lake(Method::Ppo);
    config.agent.critic_lr = 0.0;
    let pool = TaskPool::new(&config).unwrap();
    let starts: Vec<&EnvState> = (0..pool.len()).map(|i| pool.start(i)).collect();
    let table = uniform_values(&starts);
    let mut agent = TabularAgent::new(config.agent.clone()).unwrap();
    for (&k, &v) in &table {
        agent.set_value(k, v);
    }

    let mut rng = seed::stream(11, &[]);
    let trajectories = (0..8)
        .map(|_| {
            let t = rollout_from(pool.start(0), |s| agent.act_distribution(s.key()).to_vec(), &mut rng).unwrap();
            let values = t.states.iter().map(|&k| agent.value(k)).collect();
            t.with_values(values).unwrap()
        })
        .collect();
    let group = RolloutGroup::new(0, trajectories).unwrap();
    let adv = ppo_advantages(&group);
    for (t, a) in group.trajectories.iter().zip(&adv.per_step) {
        for (k, x) in t.states.iter().zip(a) {
            assert_eq!(*x, t.terminal_return - table[k]);
        }
    }

    let uniform = exact_success(&config, &pool, &TabularAgent::new(config.agent.clone()).unwrap());
    let out = train_with(&config, Some(agent.clone()), &mut |_, _| Ok(())).unwrap();
    for (&k, &v) in &table {
        assert_eq!(out.agent.value(k), v, "critic moved at state {k}");
    }
    assert!(
        out.summary.final_exact_success > 2.0 * uniform,
        "trained {} vs uniform {uniform}",
        out.summary.final_exact_success
    );
}
