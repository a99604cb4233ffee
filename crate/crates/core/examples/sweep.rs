//! Mean energy along the cloud capacity for all three schemes, as CSV.

use noma_mec::experiment::{run_sweep, Scheme, SweepSpec, SweepVariable};
use noma_mec::scenario::ScenarioSpec;
use noma_mec::solver::SolverOptions;

fn main() -> anyhow::Result<()> {
    let scenario = ScenarioSpec {
        n_users: 10,
        ..ScenarioSpec::default()
    };
    let spec = SweepSpec {
        variable: SweepVariable::CloudF,
        values: vec![2e9, 4e9, 6e9, 8e9, 1e10],
        n_instances: 20,
        seed: 0,
        schemes: Scheme::ALL.to_vec(),
        skip_infeasible: true,
    };
    let result = run_sweep(&scenario, &spec, &SolverOptions::default())?;
    eprintln!("{} draws skipped as infeasible", result.skipped);
    print!("{}", result.to_csv());
    Ok(())
}
