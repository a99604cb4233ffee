//! Alternating time / offload minimisation with a KKT certificate.
//!
//! Each iteration solves the time subproblem for the current offloads, then
//! the offload subproblem for the new time shares, and stops once the
//! relative change of the total energy drops below `tolerance`. Both
//! subproblems are solved exactly, so the energy never increases.
//!
//! The offload energy is positively homogeneous in `(t, d)`, which makes
//! plain alternation converge linearly and sometimes slowly: the energy can
//! settle to within `ξ` long before the optimality conditions hold to 1e-6.
//! After the `ξ` loop the solver therefore keeps sweeping, with a line
//! search along the last step between sweeps, until the KKT residual is
//! below [`SolverOptions::certify_to`]. The `ξ` loop is what the trace's
//! per-iteration columns record; the certification sweeps are counted
//! separately.
//!
//! A group whose data is all optional starts with `d = 0` and therefore
//! receives no time, after which its offload cannot move. Such dormant
//! groups are tested against the marginal prices: if sending data at unit
//! time would pay more than the time price `α`, the group is seeded with a
//! small share and the iteration carries on.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::data_alloc::{best_response, solve_data, DataError};
use crate::energy::{energy_report, group_offload_energy, total_objective, EnergyError, EnergyReport};
use crate::instance::{Allocation, InvalidInstance, OffloadBox, ProblemInstance};
use crate::time_alloc::{marginal_energies, solve_time, TimeError};

/// Absolute change below which the energy is considered converged even
/// when it is (near) zero.
pub const ABSOLUTE_FLOOR: f64 = 1e-15;

const ACTIVATION_TOL: f64 = 1e-9;
const ACTIVATION_SHARES: usize = 40;
/// Air-time fraction below which a group counts as dormant.
const IDLE_SHARE: f64 = 1e-9;
const LINE_SEARCH_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative energy change `ξ` that ends the iteration.
    pub tolerance: f64,
    /// Iteration cap `L_max`.
    pub max_iterations: usize,
    /// KKT residual to reach after the `ξ` loop. `None` returns the last
    /// iterate of the loop unchanged.
    pub certify_to: Option<f64>,
    /// Cap on certification sweeps.
    pub max_certify_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 100,
            certify_to: Some(1e-7),
            max_certify_sweeps: 20_000,
        }
    }
}

impl SolverOptions {
    /// Plain alternation without the certification phase.
    pub fn uncertified(tolerance: f64, max_iterations: usize) -> Self {
        Self {
            tolerance,
            max_iterations,
            certify_to: None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
    #[error("invalid solver options: {0}")]
    Options(&'static str),
    #[error("start allocation does not match the instance")]
    Start,
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

impl SolveError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SolveError::Invalid(e) if e.is_infeasible())
    }
}

/// History of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Energy at the start point, then after every iteration of the `ξ` loop.
    pub objective_per_iteration: Vec<f64>,
    /// Energy at the start point, then after every time step, offload step,
    /// dormant-group seeding and extrapolation, in order, certification
    /// included.
    pub half_step_objectives: Vec<f64>,
    /// Time multiplier per iteration, starting with 0 for the start point.
    pub alpha_per_iteration: Vec<f64>,
    /// Cloud multiplier per iteration, starting with 0 for the start point.
    pub beta_per_iteration: Vec<f64>,
    /// KKT residual after every iteration (none for the start point).
    pub kkt_per_iteration: Vec<f64>,
    /// Number of dormant groups seeded with time.
    pub activations: usize,
    /// Sweeps spent in the certification phase.
    pub certify_sweeps: usize,
    /// Energy after each certification sweep.
    pub certify_objectives: Vec<f64>,
    /// Residual of the returned allocation.
    pub kkt_residual: f64,
    /// How the `ξ` loop ended.
    pub termination: Termination,
    pub wall_time: Duration,
}

impl SolveTrace {
    /// Completed iterations of the `ξ` loop.
    pub fn iterations(&self) -> usize {
        self.objective_per_iteration.len() - 1
    }

    /// Energy when the `ξ` loop ended, before certification.
    pub fn loop_objective(&self) -> f64 {
        *self.objective_per_iteration.last().expect("trace has the start point")
    }

    /// CSV with columns `iteration,objective_joules,alpha,beta`; row 0 is
    /// the start point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective_joules,alpha,beta\n");
        for (k, ((v, a), b)) in self
            .objective_per_iteration
            .iter()
            .zip(&self.alpha_per_iteration)
            .zip(&self.beta_per_iteration)
            .enumerate()
        {
            let _ = writeln!(out, "{k},{},{},{}", sci(*v), sci(*a), sci(*b));
        }
        out
    }
}

/// Scientific notation with ten significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    pub report: EnergyReport,
    pub alpha: f64,
    pub beta: f64,
    pub trace: SolveTrace,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        self.report.total
    }
}

/// Solves the joint problem from the standard start `d = D`, `t = T/N`.
pub fn solve(instance: &ProblemInstance, options: &SolverOptions) -> Result<Solution, SolveError> {
    let n = instance.num_groups();
    let start = Allocation::new(
        vec![instance.deadline() / n.max(1) as f64; n],
        instance.mandatory_offload(),
    );
    solve_from(instance, start, options)
}

/// One time step followed by one offload step (and seeding, if any).
struct Sweep {
    alloc: Allocation,
    value: f64,
    alpha: f64,
    beta: f64,
    activated: usize,
}

fn sweep(instance: &ProblemInstance, current: &Allocation, half_steps: &mut Vec<f64>) -> Result<Sweep, SolveError> {
    let time = solve_time(instance, &current.d)?;
    half_steps.push(total_objective(instance, &Allocation::new(time.t.clone(), current.d.clone()))?);

    let data = solve_data(instance, &time.t)?;
    let alloc = Allocation::new(time.t, data.d);
    let value = total_objective(instance, &alloc)?;
    half_steps.push(value);
    let (alloc, value) = match retire_idle_groups(instance, &alloc, value, time.alpha, data.beta)? {
        Some(retired) => {
            half_steps.push(retired.1);
            retired
        }
        None => (alloc, value),
    };

    if let Some((alloc, value, beta, activated)) = seed_dormant_groups(instance, &alloc, value, time.alpha, data.beta)? {
        half_steps.push(value);
        return Ok(Sweep {
            alloc,
            value,
            alpha: time.alpha,
            beta,
            activated,
        });
    }
    Ok(Sweep {
        alloc,
        value,
        alpha: time.alpha,
        beta: data.beta,
        activated: 0,
    })
}

/// Solves the joint problem starting from `start`.
pub fn solve_from(
    instance: &ProblemInstance,
    start: Allocation,
    options: &SolverOptions,
) -> Result<Solution, SolveError> {
    let clock = Instant::now();
    instance.validate()?;
    if !(options.tolerance > 0.0) {
        return Err(SolveError::Options("tolerance must be positive"));
    }
    if options.max_iterations == 0 {
        return Err(SolveError::Options("max_iterations must be at least 1"));
    }
    if matches!(options.certify_to, Some(c) if !(c > 0.0)) {
        return Err(SolveError::Options("certification target must be positive"));
    }
    if start.t.len() != instance.num_groups() || start.d.len() != instance.num_groups() {
        return Err(SolveError::Start);
    }

    let mut current = start;
    let mut value = total_objective(instance, &current)?;
    let mut previous = current.clone();
    let (mut alpha, mut beta) = (0.0, 0.0);
    let mut trace = SolveTrace {
        objective_per_iteration: vec![value],
        half_step_objectives: vec![value],
        alpha_per_iteration: vec![0.0],
        beta_per_iteration: vec![0.0],
        kkt_per_iteration: Vec::new(),
        activations: 0,
        certify_sweeps: 0,
        certify_objectives: Vec::new(),
        kkt_residual: f64::INFINITY,
        termination: Termination::MaxIterations,
        wall_time: Duration::ZERO,
    };

    for _ in 0..options.max_iterations {
        let step = sweep(instance, &current, &mut trace.half_step_objectives)?;
        let activated = step.activated > 0;
        trace.activations += step.activated;
        let fixed_point = !activated && step.alloc.d == current.d;
        let change = (value - step.value).abs();
        let converged = !activated
            && (fixed_point || change < options.tolerance * value.abs() || change <= ABSOLUTE_FLOOR);

        previous = std::mem::replace(&mut current, step.alloc);
        value = step.value;
        alpha = step.alpha;
        beta = step.beta;
        trace.objective_per_iteration.push(value);
        trace.alpha_per_iteration.push(alpha);
        trace.beta_per_iteration.push(beta);
        trace.kkt_per_iteration.push(kkt_residual(instance, &current, alpha, beta));
        if converged {
            trace.termination = Termination::Converged;
            break;
        }
    }
    let mut kkt = *trace.kkt_per_iteration.last().expect("at least one iteration");

    if let Some(target) = options.certify_to {
        while kkt > target && trace.certify_sweeps < options.max_certify_sweeps {
            let from = match extrapolate(instance, &previous, &current, value) {
                Some((point, v)) => {
                    trace.half_step_objectives.push(v);
                    point
                }
                None => current.clone(),
            };
            let step = sweep(instance, &from, &mut trace.half_step_objectives)?;
            trace.certify_sweeps += 1;
            trace.activations += step.activated;
            let stalled = step.activated == 0 && step.alloc == current;
            previous = std::mem::replace(&mut current, step.alloc);
            value = step.value;
            alpha = step.alpha;
            beta = step.beta;
            trace.certify_objectives.push(value);
            kkt = kkt_residual(instance, &current, alpha, beta);
            if stalled {
                break;
            }
        }
    }

    trace.kkt_residual = kkt;
    let report = energy_report(instance, &current)?;
    trace.wall_time = clock.elapsed();
    Ok(Solution {
        allocation: current,
        report,
        alpha,
        beta,
        trace,
    })
}

/// Line search from `current` along `current − previous`, staying inside
/// every bound. Returns the best point if it lowers the energy.
fn extrapolate(
    instance: &ProblemInstance,
    previous: &Allocation,
    current: &Allocation,
    value: f64,
) -> Option<(Allocation, f64)> {
    let boxes = instance.offload_boxes();
    let deadline = instance.deadline();
    let dt: Vec<f64> = current.t.iter().zip(&previous.t).map(|(a, b)| a - b).collect();
    let dd: Vec<[f64; 2]> = current
        .d
        .iter()
        .zip(&previous.d)
        .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
        .collect();

    // Largest step keeping t ≥ 0, d inside its box and the cloud load.
    let mut max_step = f64::INFINITY;
    let mut limit = |x: f64, dx: f64, lo: f64, hi: f64| {
        if dx < 0.0 {
            max_step = max_step.min((x - lo) / -dx);
        } else if dx > 0.0 {
            max_step = max_step.min((hi - x) / dx);
        }
    };
    for (i, bx) in boxes.iter().enumerate() {
        limit(current.t[i], dt[i], 0.0, deadline);
        for j in 0..2 {
            limit(current.d[i][j], dd[i][j], bx.lower[j], bx.upper[j]);
        }
    }
    let load = instance.cloud_cycles(&current.d);
    let load_slope = instance.cloud_cycles(&dd);
    if load_slope > 0.0 {
        max_step = max_step.min(((instance.cloud_capacity() - load) / load_slope).max(0.0));
    }
    if !(max_step > 0.0) || dt.iter().all(|&x| x == 0.0) && dd.iter().all(|x| *x == [0.0, 0.0]) {
        return None;
    }

    let point = |lambda: f64| {
        let mut t: Vec<f64> = current.t.iter().zip(&dt).map(|(x, dx)| (x + lambda * dx).max(0.0)).collect();
        let total: f64 = t.iter().sum();
        if total > deadline {
            t.iter_mut().for_each(|x| *x *= deadline / total);
        }
        let d = current
            .d
            .iter()
            .zip(&dd)
            .zip(&boxes)
            .map(|((x, dx), bx)| [bx.clamp(0, x[0] + lambda * dx[0]), bx.clamp(1, x[1] + lambda * dx[1])])
            .collect();
        Allocation::new(t, d)
    };
    let energy = |lambda: f64| {
        let p = point(lambda);
        if instance.cloud_cycles(&p.d) > instance.cloud_capacity() {
            return f64::INFINITY;
        }
        total_objective(instance, &p).unwrap_or(f64::INFINITY)
    };

    // Expand until the energy rises, then golden-section on the bracket.
    let (mut a, mut b) = (0.0, max_step.min(1.0));
    let mut fb = energy(b);
    let mut best = (0.0, value);
    if fb < best.1 {
        best = (b, fb);
        while b < max_step {
            let next = (2.0 * b).min(max_step);
            let fnext = energy(next);
            if fnext >= fb {
                a = b / 2.0;
                b = next;
                break;
            }
            a = b;
            b = next;
            fb = fnext;
            best = (b, fb);
        }
    }
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..LINE_SEARCH_STEPS {
        let m1 = hi - golden * (hi - lo);
        let m2 = lo + golden * (hi - lo);
        let (f1, f2) = (energy(m1), energy(m2));
        for (m, f) in [(m1, f1), (m2, f2)] {
            if f < best.1 {
                best = (m, f);
            }
        }
        if f1 <= f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (best.0 > 0.0 && best.1 < value).then(|| (point(best.0), best.1))
}

/// Unit-time box for probing a dormant group: any non-negative offload for
/// users with data.
fn unit_cone(instance: &ProblemInstance, group: usize) -> OffloadBox {
    let g = &instance.groups()[group];
    let open = |r: f64| if r > 0.0 { f64::INFINITY } else { 0.0 };
    OffloadBox {
        lower: [0.0, 0.0],
        upper: [open(g.user1().data_bits), open(g.user2().data_bits)],
    }
}

/// Net energy rate a dormant group would save per second of air time at
/// prices `(alpha, beta)`. Positive means the group should transmit.
pub fn dormant_gain(instance: &ProblemInstance, group: usize, alpha: f64, beta: f64) -> f64 {
    let g = &instance.groups()[group];
    let bandwidth = instance.bandwidth();
    let v = best_response(g, &unit_cone(instance, group), 1.0, bandwidth, beta);
    let [u1, u2] = g.users();
    let saving = (u1.energy_per_cycle - beta) * u1.cycles_per_bit * v[0]
        + (u2.energy_per_cycle - beta) * u2.cycles_per_bit * v[1];
    let cost = group_offload_energy(g, v[0], v[1], 1.0, bandwidth).unwrap_or(f64::INFINITY);
    saving - cost - alpha
}

/// Offload energy scales linearly with `(t, d)`, so a group parked next to
/// the origin moves away from it only geometrically slowly. Such groups are
/// treated like dormant ones.
fn is_dormant(alloc: &Allocation, i: usize, deadline: f64) -> bool {
    alloc.t[i] <= IDLE_SHARE * deadline
}

/// Whether a dormant group would earn more than its air time costs.
fn worth_waking(instance: &ProblemInstance, group: usize, alpha: f64, beta: f64) -> bool {
    let scale = instance.groups()[group].a2() * instance.bandwidth() + alpha;
    dormant_gain(instance, group, alpha, beta) > ACTIVATION_TOL * scale
}

/// Parks idle groups that are not worth waking exactly at the origin, as
/// long as the energy does not rise beyond rounding. Left alone they shrink
/// towards it forever and eventually underflow.
fn retire_idle_groups(
    instance: &ProblemInstance,
    alloc: &Allocation,
    value: f64,
    alpha: f64,
    beta: f64,
) -> Result<Option<(Allocation, f64)>, SolveError> {
    let deadline = instance.deadline();
    let mut trial = alloc.clone();
    let mut changed = false;
    for i in 0..instance.num_groups() {
        let parked = alloc.t[i] == 0.0 && alloc.d[i] == [0.0, 0.0];
        if parked || !is_dormant(alloc, i, deadline) || instance.offload_box(i).lower != [0.0, 0.0] {
            continue;
        }
        if !worth_waking(instance, i, alpha, beta) {
            trial.t[i] = 0.0;
            trial.d[i] = [0.0, 0.0];
            changed = true;
        }
    }
    if !changed {
        return Ok(None);
    }
    let v = total_objective(instance, &trial)?;
    Ok((v <= value + ABSOLUTE_FLOOR * value.abs().max(1.0)).then_some((trial, v)))
}

type Seeded = (Allocation, f64, f64, usize);

/// Gives every profitable dormant group a share of the deadline and
/// re-solves the offloads; returns the best improving trial, if any.
fn seed_dormant_groups(
    instance: &ProblemInstance,
    alloc: &Allocation,
    value: f64,
    alpha: f64,
    beta: f64,
) -> Result<Option<Seeded>, SolveError> {
    let n = instance.num_groups();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| is_dormant(alloc, i, instance.deadline()))
        .filter(|&i| worth_waking(instance, i, alpha, beta))
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }

    let deadline = instance.deadline();
    let busy: f64 = (0..n).filter(|i| !candidates.contains(i)).map(|i| alloc.t[i]).sum();
    let k = candidates.len() as f64;
    let mut best: Option<Seeded> = None;
    for step in 0..ACTIVATION_SHARES {
        let share = if busy > 0.0 {
            0.5f64.powi(step as i32 + 1) * deadline / n as f64
        } else if step == 0 {
            deadline / k
        } else {
            break;
        };
        let mut t: Vec<f64> = if busy > 0.0 {
            let keep = (deadline - k * share) / busy;
            alloc.t.iter().map(|ti| ti * keep).collect()
        } else {
            alloc.t.clone()
        };
        for &i in &candidates {
            t[i] = share;
        }
        let data = solve_data(instance, &t)?;
        let trial = Allocation::new(t, data.d);
        let v = total_objective(instance, &trial)?;
        if v < best.as_ref().map_or(value, |b| b.1) {
            best = Some((trial, v, data.beta, candidates.len()));
        } else if best.is_some() {
            // Trials improve as the share shrinks towards the optimum, then
            // get worse; stop after the first deterioration.
            break;
        }
    }
    Ok(best.filter(|b| b.1 < value * (1.0 - 1e-15)))
}

/// Dimensionless violation of the optimality conditions at `alloc` with
/// multipliers `alpha` (deadline) and `beta` (cloud capacity).
///
/// Takes the maximum of: time stationarity `|g_i'(t_i) + α| / (a_i2 B)` for
/// groups with time; the priced gain of dormant groups; offload stationarity
/// for interior coordinates and the wrong-sign part for clamped ones, each
/// relative to the magnitudes of its terms; complementary slackness of both
/// coupling constraints; and primal infeasibility.
pub fn kkt_residual(instance: &ProblemInstance, alloc: &Allocation, alpha: f64, beta: f64) -> f64 {
    let n = instance.num_groups();
    if alloc.t.len() != n || alloc.d.len() != n {
        return f64::INFINITY;
    }
    let bandwidth = instance.bandwidth();
    let mut worst: f64 = alloc.violation(instance).max(0.0);
    if alpha < 0.0 || beta < 0.0 {
        return f64::INFINITY;
    }

    let marginals = match marginal_energies(instance, &alloc.d, &alloc.t) {
        Ok(m) => m,
        Err(_) => return f64::INFINITY,
    };
    let max_rate_scale = instance
        .groups()
        .iter()
        .map(|g| g.a2() * bandwidth)
        .fold(0.0, f64::max);

    for (i, group) in instance.groups().iter().enumerate() {
        let rate_scale = group.a2() * bandwidth;
        let t = alloc.t[i];
        if t > 0.0 {
            if alloc.d[i][0] + alloc.d[i][1] > 0.0 {
                worst = worst.max((marginals[i] + alpha).abs() / rate_scale);
            } else {
                // g' ≡ 0, so stationarity asks for α = 0 unless the share
                // is idle; an idle share with α > 0 wastes budget.
                worst = worst.max(dormant_gain(instance, i, alpha, beta).max(0.0) / (rate_scale + alpha));
            }
        } else {
            worst = worst.max(dormant_gain(instance, i, alpha, beta).max(0.0) / (rate_scale + alpha));
            continue;
        }

        let bx = instance.offload_box(i);
        let [d1, d2] = alloc.d[i];
        let tau = bandwidth * t;
        let sum_term = LN_2 * group.a1() * (LN_2 * (d1 + d2) / tau).exp();
        let weak_term = LN_2 * (group.a2() - group.a1()) * (LN_2 * d2 / tau).exp();
        let grads = [sum_term, sum_term + weak_term];
        for (j, user) in group.users().into_iter().enumerate() {
            if bx.lower[j] >= bx.upper[j] {
                continue;
            }
            let price = (beta - user.energy_per_cycle) * user.cycles_per_bit;
            let partial = grads[j] + price;
            let scale = grads[j] + (user.energy_per_cycle + beta) * user.cycles_per_bit;
            let d = alloc.d[i][j];
            let r = if d <= bx.lower[j] {
                (-partial).max(0.0)
            } else if d >= bx.upper[j] {
                partial.max(0.0)
            } else {
                partial.abs()
            };
            worst = worst.max(r / scale);
        }
    }

    let deadline = instance.deadline();
    if max_rate_scale > 0.0 {
        worst = worst.max(alpha * (deadline - alloc.total_time()).abs() / (max_rate_scale * deadline));
    }
    let capacity = instance.cloud_capacity();
    if beta > 0.0 && capacity > 0.0 {
        let max_price = instance
            .groups()
            .iter()
            .flat_map(|g| g.users())
            .map(|u| u.energy_per_cycle)
            .fold(beta, f64::max);
        let load = instance.cloud_cycles(&alloc.d);
        worst = worst.max(beta * (capacity - load).abs() / (max_price * capacity));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::UserProfile;

    fn user(r: f64, c: f64, h: f64) -> UserProfile {
        UserProfile {
            data_bits: r,
            cycles_per_bit: c,
            energy_per_cycle: 1e-10,
            local_capacity: 1e9,
            channel_gain: h,
        }
    }

    const NOISE: f64 = 1.2589254117941673e-20;

    pub(super) fn desk(cloud: f64) -> ProblemInstance {
        ProblemInstance::new(
            vec![
                (user(3e5, 1000.0, 3e-11), user(2e5, 800.0, 5e-12)),
                (user(4e5, 1200.0, 8e-12), user(1e5, 600.0, 1e-12)),
                (user(2.5e5, 1400.0, 2e-12), user(4.5e5, 900.0, 7e-13)),
            ],
            1e7,
            NOISE,
            0.1,
            cloud,
        )
    }

    #[test]
    fn trace_is_monotone_and_certified() {
        for cloud in [6e9, 2.5e9, 1.5e9, 1.25e9] {
            let inst = desk(cloud);
            let sol = solve(&inst, &SolverOptions::default()).unwrap();
            for w in sol.trace.half_step_objectives.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", sol.trace.half_step_objectives);
            }
            assert_eq!(sol.trace.termination, Termination::Converged);
            assert!(sol.trace.kkt_residual <= 1e-6, "cloud {cloud}: residual {}", sol.trace.kkt_residual);
            assert!(sol.allocation.is_feasible(&inst, 1e-9));
        }
    }

    #[test]
    fn pinned_offloads_converge_in_one_iteration() {
        let pinned = |r: f64, c: f64, h| UserProfile {
            data_bits: r,
            cycles_per_bit: c,
            energy_per_cycle: 1e-10,
            local_capacity: 1e-300,
            channel_gain: h,
        };
        // A negligible local CPU forces D = R.
        let inst = ProblemInstance::new(
            vec![
                (pinned(2e5, 1000.0, 3e-11), pinned(1e5, 800.0, 5e-12)),
                (pinned(1e5, 1200.0, 8e-12), pinned(1e5, 600.0, 1e-12)),
            ],
            1e7,
            NOISE,
            0.1,
            6e9,
        );
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.trace.iterations(), 1);
        assert_eq!(sol.allocation.d, inst.mandatory_offload());
        let t = solve_time(&inst, &inst.mandatory_offload()).unwrap().t;
        assert_eq!(sol.allocation.t, t);
    }

    #[test]
    fn dormant_groups_are_woken_up() {
        // Small tasks: nothing is mandatory, but offloading is far cheaper
        // than computing locally.
        let inst = ProblemInstance::new(
            vec![
                (user(5e4, 1000.0, 3e-11), user(4e4, 800.0, 5e-12)),
                (user(6e4, 1200.0, 8e-12), user(3e4, 600.0, 1e-12)),
            ],
            1e7,
            NOISE,
            0.1,
            6e9,
        );
        assert_eq!(inst.mandatory_cloud_cycles(), 0.0);
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert!(sol.trace.activations > 0);
        assert!(sol.objective() < 0.5 * inst.all_local_energy());
        assert!(sol.trace.kkt_residual <= 1e-6, "{}", sol.trace.kkt_residual);
        assert!(sol.allocation.t.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn idle_unprofitable_groups_are_parked() {
        // Local computing is almost free for the second group, so its best
        // air time is zero. Starting it a hair away from the origin must not
        // leave it creeping towards zero.
        let cheap = UserProfile { energy_per_cycle: 1e-16, ..user(5e4, 1000.0, 1e-13) };
        let inst = ProblemInstance::new(
            vec![(user(3e5, 1000.0, 3e-11), user(2e5, 800.0, 5e-12)), (cheap, cheap)],
            1e7,
            NOISE,
            0.1,
            6e9,
        );
        let start = Allocation::new(vec![0.1 - 1e-20, 1e-20], vec![inst.mandatory_offload()[0], [1e-12, 0.0]]);
        let sol = solve_from(&inst, start, &SolverOptions::default()).unwrap();
        assert_eq!(sol.allocation.t[1], 0.0);
        assert_eq!(sol.allocation.d[1], [0.0, 0.0]);
        assert!(sol.trace.kkt_residual <= 1e-7, "{}", sol.trace.kkt_residual);

        // A generated cell where this used to end in an underflow.
        let spec = crate::scenario::ScenarioSpec {
            cloud_capacity_cycles: 4e9,
            ..Default::default()
        };
        let inst = crate::scenario::generate(&spec.with_seed(18934)).unwrap();
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert!(sol.trace.kkt_residual <= 1e-7, "{}", sol.trace.kkt_residual);
    }

    #[test]
    fn perturbed_optimum_has_large_residual() {
        let inst = desk(1.5e9);
        let sol = solve(&inst, &SolverOptions { tolerance: 1e-12, max_iterations: 100, ..SolverOptions::default() }).unwrap();
        let mut t = sol.allocation.t.clone();
        t[0] += 0.01 * inst.deadline();
        let total: f64 = t.iter().sum();
        for ti in &mut t {
            *ti *= inst.deadline() / total;
        }
        let perturbed = Allocation::new(t, sol.allocation.d.clone());
        assert!(kkt_residual(&inst, &perturbed, sol.alpha, sol.beta) > 1e-3);
    }

    #[test]
    fn all_zero_workload_is_zero_energy() {
        let inst = ProblemInstance::new(vec![(user(0.0, 1000.0, 3e-11), user(0.0, 800.0, 5e-12))], 1e7, NOISE, 0.1, 6e9);
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.objective(), 0.0);
        assert_eq!(sol.trace.termination, Termination::Converged);
    }

    #[test]
    fn options_are_checked() {
        let inst = desk(6e9);
        assert!(solve(&inst, &SolverOptions { tolerance: 0.0, max_iterations: 5, ..SolverOptions::default() }).is_err());
        assert!(solve(&inst, &SolverOptions { tolerance: 1e-4, max_iterations: 0, ..SolverOptions::default() }).is_err());
        let err = solve(&desk(1e3), &SolverOptions::default()).unwrap_err();
        assert!(err.is_infeasible());
    }

    #[test]
    fn csv_has_header_and_start_row() {
        let sol = solve(&desk(6e9), &SolverOptions::default()).unwrap();
        let csv = sol.trace.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,objective_joules,alpha,beta");
        assert_eq!(lines.len(), sol.trace.iterations() + 2);
        assert!(lines[1].starts_with("0,"));
    }
}
