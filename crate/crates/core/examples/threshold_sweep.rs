//! EVPO over switching thresholds.

use evpo::trainer::{sweep_threshold, Method, TrainConfig};

fn main() -> evpo::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let thresholds = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let seeds: Vec<u64> = (0..seeds).collect();
    let rows = sweep_threshold(&TrainConfig::frozen_lake(Method::Evpo), &thresholds, &seeds)?;
    println!("threshold  best_val  critic_frac");
    for t in thresholds {
        let mine: Vec<_> = rows.iter().filter(|r| r.threshold == t).collect();
        let n = mine.len() as f64;
        println!(
            "{t:>9}  {:.4}  {:>11.3}",
            mine.iter().map(|r| r.summary.best_val_success).sum::<f64>() / n,
            mine.iter().map(|r| r.summary.mean_critic_fraction).sum::<f64>() / n
        );
    }
    Ok(())
}
