//! Optimal blend of critic and batch mean, and where the critic stops helping.

use evpo::stats::{fused_baseline, kalman_gain, population_ev, theorem1_predicates, GaussianRegime};

fn main() -> evpo::Result<()> {
    println!("{:>5} {:>5} {:>5} {:>7} {:>7}  ev<=0  pa>=pb  K>=1/2", "p_a", "p_b", "r", "gain", "ev");
    for (p_a, p_b, r) in [(0.1, 1.0, 1.0), (1.0, 3.0, 1.0), (1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (5.0, 0.5, 0.2)] {
        let regime = GaussianRegime::new(p_a, p_b, r)?;
        let k = kalman_gain(&regime)?;
        let ev = population_ev(&regime)?;
        let p = theorem1_predicates(&regime)?;
        println!(
            "{p_a:>5} {p_b:>5} {r:>5} {k:>7.3} {ev:>7.3}  {:<5}  {:<6}  {}",
            p.ev_nonpositive, p.pa_ge_pb, p.gain_ge_half
        );
    }
    let k = kalman_gain(&GaussianRegime::new(1.0, 3.0, 1.0)?)?;
    println!("critic 0.8, batch mean 0.2, gain {k}: baseline {}", fused_baseline(0.8, 0.2, k)?);
    Ok(())
}
