//! One training run from a preset.
//!
//! `cargo run --release --example train_evpo -- sokoban_evpo 1`

use evpo::trainer::{train, TrainConfig};

fn main() -> evpo::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "frozenlake_evpo".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let Some(config) = TrainConfig::preset(&preset) else {
        eprintln!("unknown preset {preset}; try one of {}", TrainConfig::PRESETS.join(", "));
        std::process::exit(2);
    };
    let out = train(&TrainConfig { seed, ..config })?;
    println!("step  train  critic_frac  batch_ev   val");
    for r in out.records.iter().filter(|r| r.val_success_rate.is_some()) {
        println!(
            "{:>4}  {:.3}  {:>11.3}  {:>8.3}  {:.4}",
            r.step,
            r.train_success_rate,
            r.gate_critic_fraction,
            r.batch_ev,
            r.val_success_rate.unwrap_or_default()
        );
    }
    print!("{}", out.summary.to_text());
    Ok(())
}
