//! Cold start and critic warmup against plain PPO, paired by seed.

use evpo::trainer::{run_cold_start, run_warmup, train, Method, TrainConfig};

fn main() -> evpo::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut totals = [0.0; 3];
    println!("seed  ppo_auc  cold-ppo  warm-ppo");
    for s in 0..seeds {
        let base = TrainConfig { seed: s, ..TrainConfig::frozen_lake(Method::Ppo) };
        let ppo = train(&base)?.summary.auc_train_success;
        let cold = run_cold_start(&base, 25)?.summary.auc_train_success;
        let warm = run_warmup(&base, 200)?.summary.auc_train_success;
        println!("{s:>4}  {ppo:.5}  {:+.5}  {:+.5}", cold - ppo, warm - ppo);
        for (t, v) in totals.iter_mut().zip([ppo, cold, warm]) {
            *t += v / seeds as f64;
        }
    }
    println!("mean  ppo {:.5}  cold {:.5}  warm {:.5}", totals[0], totals[1], totals[2]);
    Ok(())
}
