//! The same rollout group under every baseline.

use evpo::advantage::{
    batch_mean_advantages, evpo_advantages, gae_advantages, grpo_advantages, ppo_advantages, AdvantageSet,
    RolloutGroup, Trajectory,
};

fn show(name: &str, set: &AdvantageSet) {
    let rows: Vec<String> =
        set.per_step.iter().map(|t| t.iter().map(|a| format!("{a:+.3}")).collect::<Vec<_>>().join(" ")).collect();
    println!("{name:<10} [{}]  pooled var {:.4}", rows.join(" | "), set.pooled_variance());
}

fn main() -> evpo::Result<()> {
    // Shared start state 0; two successes and two failures of different lengths.
    let traj = |states: Vec<u64>, reward: f64, values: Vec<f64>| {
        let n = states.len();
        let mut rewards = vec![0.0; n];
        rewards[n - 1] = reward;
        Trajectory::new(states, vec![0; n], rewards, values)
    };
    let group = RolloutGroup::new(
        7,
        vec![
            traj(vec![0, 1, 2], 1.0, vec![0.5, 0.7, 0.9])?,
            traj(vec![0, 3], 0.0, vec![0.5, 0.1])?,
            traj(vec![0, 1, 4], 1.0, vec![0.5, 0.7, 0.6])?,
            traj(vec![0, 3, 5, 6], 0.0, vec![0.5, 0.1, 0.2, 0.0])?,
        ],
    )?;
    show("ppo", &ppo_advantages(&group));
    show("gae(1,1)", &gae_advantages(&group, 1.0, 1.0)?);
    show("grpo", &grpo_advantages(&group));
    show("batchmean", &batch_mean_advantages(&group));
    for tau in [-0.2, 0.0, 0.9] {
        let set = evpo_advantages(&group, tau);
        println!("evpo tau={tau:+}: ev {:.3} -> {}", set.diagnostics.ev, set.mode.as_str());
    }
    Ok(())
}
