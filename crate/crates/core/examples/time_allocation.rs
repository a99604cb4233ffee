//! Time shares for fixed offloads: every group with data ends up with the
//! same marginal energy `g'(t) = −α`, and the shares fill the frame.

use noma_mec::scenario::{generate, ScenarioSpec};
use noma_mec::time_alloc::{marginal_energies, solve_time};

fn main() -> anyhow::Result<()> {
    let spec = ScenarioSpec {
        n_users: 8,
        ..ScenarioSpec::default()
    };
    let instance = generate(&spec)?;
    // Offload everything: the most demanding fixed workload.
    let d: Vec<[f64; 2]> = instance
        .groups()
        .iter()
        .map(|g| [g.user1().data_bits, g.user2().data_bits])
        .collect();
    let time = solve_time(&instance, &d)?;
    let slopes = marginal_energies(&instance, &d, &time.t)?;
    println!("alpha = {:.6e} J/s", time.alpha);
    for (i, (t, g)) in time.t.iter().zip(&slopes).enumerate() {
        println!("group {i}: t = {:.4} ms, g' = {:.6e}", t * 1e3, g);
    }
    println!("sum t = {:.12} s of {}", time.t.iter().sum::<f64>(), instance.deadline());
    Ok(())
}
