//! Corrupt a trained critic with Gaussian noise and keep training.

use evpo::stats::mean;
use evpo::trainer::{run_noise_injection, train, Method, TrainConfig};

fn main() -> evpo::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let sigmas = [0.0, 0.3, 1.0, 3.0, 10.0];
    let mut finals = vec![Vec::new(); sigmas.len()];
    let mut evs = vec![Vec::new(); sigmas.len()];
    for s in 0..seeds {
        let base = TrainConfig { seed: s, ..TrainConfig::frozen_lake(Method::Ppo) };
        let trained = train(&base)?.agent;
        for (i, &sigma) in sigmas.iter().enumerate() {
            let cont = TrainConfig { iterations: 150, seed: 1000 + s, ..base.clone() };
            let out = run_noise_injection(&cont, trained.clone(), sigma, 1)?;
            finals[i].push(out.summary.final_exact_success);
            let mut ev: Vec<f64> = out.records.iter().map(|r| r.batch_ev).collect();
            ev.sort_by(f64::total_cmp);
            evs[i].push(ev[ev.len() / 2]);
        }
    }
    println!("sigma  final_success  median_batch_ev");
    for (i, sigma) in sigmas.iter().enumerate() {
        println!("{sigma:>5}  {:>13.4}  {:>15.3}", mean(&finals[i]), mean(&evs[i]));
    }
    Ok(())
}
