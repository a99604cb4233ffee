//! Check the solver against the exhaustive grid on a two-group instance.

use noma_mec::oracle::grid_oracle;
use noma_mec::scenario::{generate, ScenarioSpec};
use noma_mec::solver::{solve, SolverOptions};

fn main() -> anyhow::Result<()> {
    let spec = ScenarioSpec {
        n_users: 4,
        cloud_capacity_cycles: 1.5e9,
        ..ScenarioSpec::default()
    };
    let instance = generate(&spec.with_seed(11))?;
    let solution = solve(&instance, &SolverOptions::default())?;
    let oracle = grid_oracle(&instance, 64)?;
    println!("solver       {:.12e} J", solution.objective());
    println!("grid best    {:.12e} J (bound {:.3e})", oracle.grid_objective, oracle.resolution_bound);
    println!("polished     {:.12e} J", oracle.best_objective);
    println!("independent  {:.12e} J", oracle.independent_objective);
    let gap = solution.objective() - oracle.best_objective;
    println!("solver − oracle = {gap:.3e} J, within bound: {}", gap.abs() <= oracle.resolution_bound);
    Ok(())
}
