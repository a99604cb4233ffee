//! Draw a 30-user cell, solve it and print the allocation per group.
//!
//! cargo run --release --example solve_instance -- [seed]

use noma_mec::scenario::{generate, ScenarioSpec};
use noma_mec::solver::{solve, SolverOptions};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let instance = generate(&ScenarioSpec::default().with_seed(seed))?;
    let solution = solve(&instance, &SolverOptions::default())?;

    println!("group      t [ms]   d1 [kbit]   d2 [kbit]   p1 [W]      p2 [W]");
    for (i, ((t, d), p)) in solution
        .allocation
        .t
        .iter()
        .zip(&solution.allocation.d)
        .zip(&solution.report.powers)
        .enumerate()
    {
        println!(
            "{i:>5} {:>10.3} {:>11.1} {:>11.1} {:>11.3e} {:>11.3e}",
            t * 1e3,
            d[0] / 1e3,
            d[1] / 1e3,
            p[0],
            p[1]
        );
    }
    let trace = &solution.trace;
    println!(
        "energy {:.6} J (offload {:.6}, local {:.6}); all-local {:.6} J",
        solution.objective(),
        solution.report.total_offload(),
        solution.report.total_local(),
        instance.all_local_energy()
    );
    println!(
        "{} iterations, {} certification sweeps, KKT residual {:.2e}, alpha {:.4e}, beta {:.4e}",
        trace.iterations(),
        trace.certify_sweeps,
        trace.kkt_residual,
        solution.alpha,
        solution.beta
    );
    Ok(())
}
