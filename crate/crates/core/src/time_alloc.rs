//! Optimal time shares for fixed offloaded data.
//!
//! For fixed `d` the objective is separable in the groups' time shares and
//! each group's offload energy is convex and decreasing in its share. The
//! optimum spends the whole deadline: every group carrying data receives
//! the `t_i` at which its marginal energy `g_i'(t_i)` equals `−α`, and the
//! multiplier `α > 0` is chosen so that the shares add up to `T`.
//!
//! Both the per-group inversion of `g_i'` and the search for `α` are
//! deterministic bisections.

use crate::energy::{g_prime, g_prime_saturating, EnergyError};
use crate::instance::{NomaGroup, ProblemInstance};

/// Relative accuracy of the target in [`invert_g_prime`].
pub const INVERT_TARGET_TOL: f64 = 1e-15;
/// Relative bracket width at which [`invert_g_prime`] stops.
pub const INVERT_BRACKET_TOL: f64 = 1e-15;
/// `|Σt − T| / T` accepted by the multiplier search before the final rescale.
pub const BUDGET_TOL: f64 = 1e-15;

const MAX_BRACKET_STEPS: usize = 2200;
const MAX_BISECTION_STEPS: usize = 400;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeError {
    #[error("target {target:e} outside range of g' (must be negative)")]
    TargetOutOfRange { target: f64 },
    #[error("group carries no data, g' is identically zero")]
    NoData,
    #[error("offloaded data has {got} groups, instance has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("could not bracket the time multiplier")]
    Bracket,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Result of [`solve_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSolution {
    pub t: Vec<f64>,
    /// Multiplier of the deadline constraint, J/s.
    pub alpha: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

/// Time share `t` with `g'(t) = target` for a group carrying `d1 + d2 > 0`
/// bits.
///
/// `g'` is increasing on `(0, ∞)` with range `(−∞, 0)`, so any negative
/// target has exactly one preimage.
pub fn invert_g_prime(
    group: &NomaGroup,
    d1: f64,
    d2: f64,
    bandwidth: f64,
    target: f64,
) -> Result<f64, TimeError> {
    invert_counted(group, d1, d2, bandwidth, target).map(|(t, _)| t)
}

fn invert_counted(
    group: &NomaGroup,
    d1: f64,
    d2: f64,
    bandwidth: f64,
    target: f64,
) -> Result<(f64, usize), TimeError> {
    if !(target < 0.0) {
        return Err(TimeError::TargetOutOfRange { target });
    }
    if !(d1 + d2 > 0.0) {
        return Err(TimeError::NoData);
    }
    let eval = |t: f64| g_prime_saturating(group, d1, d2, bandwidth, t);

    // Start where the aggregate spectral efficiency is one bit/s/Hz.
    let start = (d1 + d2) / bandwidth;
    let mut lo = start;
    let mut hi = start;
    let mut steps = 0;
    while eval(hi) <= target {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(TimeError::TargetOutOfRange { target });
        }
    }
    while eval(lo) > target {
        lo *= 0.5;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(TimeError::TargetOutOfRange { target });
        }
    }
    if lo == hi {
        // Exactly at the start point.
        return Ok((lo, steps));
    }

    let mut iterations = steps;
    let mut best = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_STEPS {
        iterations += 1;
        let mid = if hi > 2.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        best = mid;
        let value = eval(mid);
        if (value - target).abs() <= INVERT_TARGET_TOL * target.abs() {
            break;
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= INVERT_BRACKET_TOL * mid {
            best = 0.5 * (lo + hi);
            break;
        }
    }
    Ok((best, iterations))
}

fn check_dims(instance: &ProblemInstance, d: &[[f64; 2]]) -> Result<(), TimeError> {
    if d.len() != instance.num_groups() {
        return Err(TimeError::DimensionMismatch {
            expected: instance.num_groups(),
            got: d.len(),
        });
    }
    Ok(())
}

/// `Σ_i [g_i'^{-1}(−α)]⁺`, the time the groups would use at price `alpha`.
pub fn time_demand(instance: &ProblemInstance, d: &[[f64; 2]], alpha: f64) -> Result<f64, TimeError> {
    check_dims(instance, d)?;
    Ok(shares_at(instance, d, alpha)?.0.iter().sum())
}

fn shares_at(instance: &ProblemInstance, d: &[[f64; 2]], alpha: f64) -> Result<(Vec<f64>, usize), TimeError> {
    let bandwidth = instance.bandwidth();
    let mut iterations = 0;
    let mut t = Vec::with_capacity(d.len());
    for (group, di) in instance.groups().iter().zip(d) {
        if di[0] + di[1] > 0.0 {
            let (ti, it) = invert_counted(group, di[0], di[1], bandwidth, -alpha)?;
            iterations += it;
            t.push(ti);
        } else {
            t.push(0.0);
        }
    }
    Ok((t, iterations))
}

/// Optimal time shares for fixed offloaded bits `d`.
///
/// Groups without data get `t_i = 0`; the rest share the whole deadline.
/// With no data anywhere the result is the zero vector and `α = 0`.
pub fn solve_time(instance: &ProblemInstance, d: &[[f64; 2]]) -> Result<TimeSolution, TimeError> {
    check_dims(instance, d)?;
    let deadline = instance.deadline();
    let n = instance.num_groups();
    if d.iter().all(|di| di[0] + di[1] <= 0.0) {
        return Ok(TimeSolution {
            t: vec![0.0; n],
            alpha: 0.0,
            inner_iterations: 0,
            outer_iterations: 0,
        });
    }

    let mut inner = 0;
    let mut outer = 0;
    let mut demand = |alpha: f64| -> Result<(Vec<f64>, f64), TimeError> {
        let (t, it) = shares_at(instance, d, alpha)?;
        inner += it;
        outer += 1;
        let total = t.iter().sum();
        Ok((t, total))
    };

    // Demand falls as α grows; bracket from α = 1 J/s in both directions.
    let mut lo = 1.0;
    let mut lo_shares = demand(lo)?;
    let mut steps = 0;
    while lo_shares.1 < deadline {
        lo *= 0.5;
        lo_shares = demand(lo)?;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(TimeError::Bracket);
        }
    }
    let mut hi = 1.0;
    let mut hi_shares = lo_shares.clone();
    if lo != 1.0 {
        hi = 2.0 * lo;
        hi_shares = demand(hi)?;
    }
    while hi_shares.1 > deadline {
        hi *= 2.0;
        hi_shares = demand(hi)?;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(TimeError::Bracket);
        }
    }

    let mut best = (lo, lo_shares.clone());
    if (hi_shares.1 - deadline).abs() < (best.1 .1 - deadline).abs() {
        best = (hi, hi_shares.clone());
    }
    for _ in 0..MAX_BISECTION_STEPS {
        if (best.1 .1 - deadline).abs() <= BUDGET_TOL * deadline || hi <= lo * (1.0 + 1e-15) {
            break;
        }
        let mid = (lo * hi).sqrt();
        let shares = demand(mid)?;
        debug_assert!(shares.1 <= lo_shares.1 && shares.1 >= hi_shares.1, "time demand not monotone in alpha");
        if shares.1 > deadline {
            lo = mid;
            lo_shares = shares.clone();
        } else {
            hi = mid;
            hi_shares = shares.clone();
        }
        if (shares.1 - deadline).abs() < (best.1 .1 - deadline).abs() {
            best = (mid, shares);
        }
    }

    let (alpha, (mut t, total)) = best;
    let scale = deadline / total;
    for ti in &mut t {
        *ti *= scale;
    }
    Ok(TimeSolution {
        t,
        alpha,
        inner_iterations: inner,
        outer_iterations: outer,
    })
}

/// Marginal energy `g_i'(t_i)` of each group at the given shares; zero for
/// groups without data or without time.
pub fn marginal_energies(instance: &ProblemInstance, d: &[[f64; 2]], t: &[f64]) -> Result<Vec<f64>, EnergyError> {
    instance
        .groups()
        .iter()
        .zip(d.iter().zip(t))
        .map(|(g, (di, &ti))| {
            if ti > 0.0 {
                g_prime(g, di[0], di[1], instance.bandwidth(), ti)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}
