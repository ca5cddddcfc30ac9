//! Monte Carlo checks on the Gaussian critic/return model.

use evpo::stats::GaussianRegime;
use evpo::verify::{
    gain_grid, theorem1_grid, verify_gain_optimality, verify_theorem1, verify_variance_guarantee, Fault,
};

fn main() -> evpo::Result<()> {
    let t1 = verify_theorem1(&theorem1_grid(2000, 0), 20_000, 0, Fault::None)?;
    print!("{t1}");
    for (p_a, p_b, r) in [(4.0, 1.0, 1.0), (0.0, 1.0, 1.0), (1.0, 1.0, 1.0)] {
        let rep = verify_variance_guarantee(&GaussianRegime::new(p_a, p_b, r)?, 64, 5000, 0, Fault::None)?;
        println!(
            "var p_a={p_a} p_b={p_b} r={r}: ppo {:.3} batch_mean {:.3} evpo {:.3} (critic in {:.0}% of groups)",
            rep.var_ppo,
            rep.var_batch_mean,
            rep.var_evpo,
            100.0 * rep.critic_fraction
        );
    }
    let gain = verify_gain_optimality(&[GaussianRegime::new(1.0, 3.0, 1.0)?], &gain_grid(), 200_000, 0)?;
    print!("{gain}");
    Ok(())
}
