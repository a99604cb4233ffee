//! Energy per iteration for three cloud capacities, as CSV.
//!
//! cargo run --release --example convergence_trace -- [seed] > trace.csv

use noma_mec::experiment::run_convergence;
use noma_mec::scenario::ScenarioSpec;
use noma_mec::solver::SolverOptions;

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let result = run_convergence(&ScenarioSpec::default().with_seed(seed), &[6e9, 8e9, 1e10], &SolverOptions::default())?;
    print!("{}", result.to_csv());
    for (f, trace) in result.cloud_capacities.iter().zip(&result.traces) {
        eprintln!(
            "F = {f:.0e}: {} iterations, then {} certification sweeps to KKT {:.1e}",
            trace.iterations(),
            trace.certify_sweeps,
            trace.kkt_residual
        );
    }
    Ok(())
}
