//! Explained variance of a critic on a few hand-made batches.

use evpo::stats::{explained_variance, Gate};

fn main() -> evpo::Result<()> {
    let returns = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    let cases: [(&str, [f64; 6]); 4] = [
        ("perfect critic", [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
        ("constant critic", [0.5; 6]),
        ("half-right critic", [0.75, 0.25, 0.75, 0.25, 0.75, 0.25]),
        ("anti-correlated critic", [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]),
    ];
    for (name, values) in cases {
        let ev = explained_variance(&returns, &values)?;
        println!("{name:<24} ev = {ev:>6.3}  gate at 0: {}", Gate::select(ev, 0.0).as_str());
    }
    // A group where every rollout failed has no return variance at all.
    let ev = explained_variance(&[0.0; 4], &[0.3, 0.1, 0.2, 0.9])?;
    println!("{:<24} ev = {ev:>6.3}", "all returns equal");
    Ok(())
}
