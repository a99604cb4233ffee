//! NOMA with optimised time against equal time shares and orthogonal access.

use noma_mec::baselines::{equal_resource_solve, oma_solve};
use noma_mec::scenario::{generate, ScenarioSpec};
use noma_mec::solver::{solve, SolverOptions};

fn main() -> anyhow::Result<()> {
    let options = SolverOptions::default();
    println!("seed   proposed [J]   equal [J]      oma [J]");
    for seed in 0..8 {
        let spec = ScenarioSpec {
            n_users: 10,
            cloud_capacity_cycles: 4e9,
            ..ScenarioSpec::default()
        };
        let instance = generate(&spec.with_seed(seed))?;
        if instance.validate().is_err() {
            println!("{seed:>4}   infeasible");
            continue;
        }
        let proposed = solve(&instance, &options)?.objective();
        let equal = equal_resource_solve(&instance)?.1.total;
        let oma = oma_solve(&instance, &options)?.objective();
        println!("{seed:>4}   {proposed:<14.6e} {equal:<14.6e} {oma:<14.6e}");
    }
    Ok(())
}
