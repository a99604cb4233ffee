//! Comparison schemes: equal time shares, and orthogonal access.

use crate::data_alloc::solve_data;
use crate::energy::{energy_report, EnergyReport};
use crate::instance::{Allocation, ProblemInstance, UserProfile};
use crate::solver::{solve, Solution, SolveError, SolverOptions};

/// Equal time shares `T/N` with the optimal offloads for those shares.
pub fn equal_resource_solve(instance: &ProblemInstance) -> Result<(Allocation, EnergyReport), SolveError> {
    instance.validate()?;
    let n = instance.num_groups();
    let t = vec![instance.deadline() / n as f64; n];
    let data = solve_data(instance, &t)?;
    let alloc = Allocation::new(t, data.d);
    let report = energy_report(instance, &alloc)?;
    Ok((alloc, report))
}

/// Silent partner that turns a group into a single-user slice: no data, so
/// its offload box is `[0, 0]` and it never transmits.
fn placeholder(user: &UserProfile) -> UserProfile {
    UserProfile {
        data_bits: 0.0,
        cycles_per_bit: 1.0,
        energy_per_cycle: 0.0,
        local_capacity: 1.0,
        channel_gain: user.channel_gain,
    }
}

/// The orthogonal-access version of `instance`: every user gets a slice of
/// its own, strong users of each pair first.
pub fn oma_instance(instance: &ProblemInstance) -> ProblemInstance {
    let pairs = instance
        .groups()
        .iter()
        .flat_map(|g| g.users())
        .map(|u| (*u, placeholder(u)))
        .collect();
    ProblemInstance::new(
        pairs,
        instance.bandwidth(),
        instance.noise_psd(),
        instance.deadline(),
        instance.cloud_capacity(),
    )
}

/// Time-division baseline solved by the same alternating solver on
/// [`oma_instance`]. The allocation indexes the `2N` single-user slices.
pub fn oma_solve(instance: &ProblemInstance, options: &SolverOptions) -> Result<Solution, SolveError> {
    instance.validate()?;
    solve(&oma_instance(instance), options)
}
