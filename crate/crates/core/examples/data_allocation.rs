//! Offloads for fixed equal time shares while the cloud capacity shrinks:
//! the cloud price β rises from zero once the capacity binds.

use noma_mec::data_alloc::solve_data;
use noma_mec::scenario::{generate, ScenarioSpec};

fn main() -> anyhow::Result<()> {
    let spec = ScenarioSpec {
        n_users: 8,
        ..ScenarioSpec::default()
    };
    let base = generate(&spec)?;
    let n = base.num_groups();
    let t = vec![base.deadline() / n as f64; n];
    let floor = base.mandatory_cloud_cycles();
    println!("mandatory cloud load {floor:.3e} cycles");
    for f in [8e9, 4e9, 2e9, 1.5e9, 1.2e9] {
        let instance = base.with_cloud_capacity(f);
        if instance.validate().is_err() {
            println!("F = {f:.1e}: infeasible");
            continue;
        }
        let data = solve_data(&instance, &t)?;
        println!(
            "F = {f:.1e}: beta = {:.4e} J/cycle, load = {:.4e}, {} bisection steps",
            data.beta,
            instance.cloud_cycles(&data.d),
            data.search_iterations
        );
    }
    Ok(())
}
