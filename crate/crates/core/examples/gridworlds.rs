//! Generated FrozenLake and Sokoban tasks with exact success rates.
//!
//! `cargo run --example gridworlds -- 3` shows layout seed 3.

use evpo::env::{reset, rollout, solver, EnvConfig, NUM_ACTIONS};
use evpo::seed;

fn main() -> evpo::Result<()> {
    let layout_seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let uniform = |_: &_| vec![1.0 / NUM_ACTIONS as f64; NUM_ACTIONS];
    for config in [EnvConfig::frozen_lake(layout_seed), EnvConfig::mini_sokoban(layout_seed)] {
        let start = reset(&config)?;
        println!("{} seed {layout_seed}, {} steps", config.kind.as_str(), config.max_steps);
        print!("{}", start.layout.to_text());
        let mut rng = seed::stream(layout_seed, &[1]);
        let episodes = 2000;
        let mut wins = 0;
        for _ in 0..episodes {
            wins += rollout(&config, uniform, &mut rng)?.succeeded() as usize;
        }
        println!(
            "uniform policy: {:.4} sampled, {:.4} exact; best possible {:.4}\n",
            wins as f64 / episodes as f64,
            solver::policy_success(&start, uniform)?,
            solver::optimal_success(&start)
        );
    }
    Ok(())
}
