//! Optimal offloaded bits for fixed time shares.
//!
//! With `t` fixed the problem decouples into one two-variable convex problem
//! per group, tied together only by the cloud-capacity constraint. Pricing
//! that constraint at `β` J/cycle, each group minimises
//!
//! ```text
//! E_i(d1, d2, t_i) − w1·d1 − w2·d2,   w_j = (P_j − β)·C_j
//! ```
//!
//! over its box `[D, R]`. [`best_response`] solves that exactly in closed
//! form, piecewise over which bound (if any) the strong user's offload sits
//! on. When neither user is clamped the result coincides with
//! [`d1_of_beta`] / [`d2_of_beta`]. The cloud load of the responses is
//! non-increasing in `β`, so the multiplier is found by bisection.

use std::f64::consts::LN_2;

use crate::energy::group_offload_energy;
use crate::instance::{NomaGroup, OffloadBox, ProblemInstance};

/// Relative width of the multiplier bracket at which the search stops.
pub const BETA_TOL: f64 = 1e-15;
/// Iteration cap of the multiplier bisection.
pub const MAX_SEARCH_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("group {group} needs offload but has no time")]
    GroupNeedsTime { group: usize },
    #[error("degenerate group: closed form needs a2 > a1")]
    Degenerate,
    #[error("time shares have {got} groups, instance has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mandatory offload exceeds cloud capacity")]
    Infeasible,
}

/// Result of [`solve_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataSolution {
    pub d: Vec<[f64; 2]>,
    /// Multiplier of the cloud-capacity constraint, J/cycle.
    pub beta: f64,
    pub search_iterations: usize,
}

/// Net local saving per offloaded bit at cloud price `beta`.
fn savings(group: &NomaGroup, beta: f64) -> [f64; 2] {
    let [u1, u2] = group.users();
    [
        (u1.energy_per_cycle - beta) * u1.cycles_per_bit,
        (u2.energy_per_cycle - beta) * u2.cycles_per_bit,
    ]
}

/// Group Lagrangian (offload energy minus priced savings); `+∞` when the
/// rate exponent overflows.
fn group_lagrangian(group: &NomaGroup, d: [f64; 2], t: f64, bandwidth: f64, beta: f64) -> f64 {
    let w = savings(group, beta);
    match group_offload_energy(group, d[0], d[1], t, bandwidth) {
        Ok(e) => e - w[0] * d[0] - w[1] * d[1],
        Err(_) => f64::INFINITY,
    }
}

/// Weak-user offload from the joint stationarity conditions, clamped to
/// `[D2, R2]`. A non-positive log argument means the derivative never
/// vanishes and the lower bound is returned.
pub fn d2_of_beta(
    group: &NomaGroup,
    bx: &OffloadBox,
    t: f64,
    bandwidth: f64,
    beta: f64,
) -> Result<f64, DataError> {
    let gap = group.a2() - group.a1();
    if !(gap > 0.0) {
        return Err(DataError::Degenerate);
    }
    let [w1, w2] = savings(group, beta);
    let arg = (w2 - w1) / (LN_2 * gap);
    if !(arg > 0.0) {
        return Ok(bx.lower[1]);
    }
    Ok(bx.clamp(1, bandwidth * t * arg.log2()))
}

/// Strong-user offload from the joint stationarity conditions, clamped to
/// `[D1, R1]`.
///
/// When the log argument is not a positive ratio of positive factors there
/// is no interior stationary point. The bound is then picked by the sign of
/// the partial derivative at the box midpoint and confirmed by comparing
/// the group Lagrangian at both bounds.
pub fn d1_of_beta(
    group: &NomaGroup,
    bx: &OffloadBox,
    t: f64,
    bandwidth: f64,
    beta: f64,
) -> Result<f64, DataError> {
    let gap = group.a2() - group.a1();
    if !(gap > 0.0) {
        return Err(DataError::Degenerate);
    }
    let [w1, w2] = savings(group, beta);
    let numerator = gap * w1;
    let denominator = group.a1() * (w2 - w1);
    if numerator > 0.0 && denominator > 0.0 {
        return Ok(bx.clamp(0, bandwidth * t * (numerator / denominator).log2()));
    }

    let d2 = d2_of_beta(group, bx, t, bandwidth, beta)?;
    let mid = 0.5 * (bx.lower[0] + bx.upper[0]);
    let partial = LN_2 * group.a1() * (LN_2 * (mid + d2) / (bandwidth * t)).exp() - w1;
    let (preferred, other) = if partial >= 0.0 {
        (bx.lower[0], bx.upper[0])
    } else {
        (bx.upper[0], bx.lower[0])
    };
    let at = |d1| group_lagrangian(group, [d1, d2], t, bandwidth, beta);
    Ok(if at(other) < at(preferred) { other } else { preferred })
}

/// Exact minimiser of the priced group problem over its box for `t > 0`.
///
/// Upper bounds may be `+∞`. Handles `a1 = a2`, where the energy only sees
/// `d1 + d2` and ties go to the strong user.
pub fn best_response(group: &NomaGroup, bx: &OffloadBox, t: f64, bandwidth: f64, beta: f64) -> [f64; 2] {
    debug_assert!(t > 0.0);
    let tau = bandwidth * t;
    let a1 = group.a1();
    let gap = group.a2() - group.a1();
    let [w1, w2] = savings(group, beta);
    let (lo1, hi1) = (bx.lower[0], bx.upper[0]);
    let (lo2, hi2) = (bx.lower[1], bx.upper[1]);

    // Sum of offloads at which the strong user's derivative vanishes.
    let target_sum = if w1 > 0.0 {
        tau * (w1 / (LN_2 * a1)).log2()
    } else {
        f64::NEG_INFINITY
    };
    let strong_given = |d2: f64| (target_sum - d2).max(lo1).min(hi1);
    // Derivative of the reduced one-dimensional problem in d2.
    let slope = |d2: f64| {
        let d1 = strong_given(d2);
        let mut s = LN_2 * a1 * (LN_2 * (d1 + d2) / tau).exp() - w2;
        if gap > 0.0 {
            s += LN_2 * gap * (LN_2 * d2 / tau).exp();
        }
        s
    };

    let d2 = if lo2 >= hi2 || slope(lo2) >= 0.0 {
        lo2
    } else if slope(hi2) <= 0.0 {
        hi2
    } else {
        let mut points = vec![lo2];
        let mut kinks = [target_sum - hi1, target_sum - lo1];
        kinks.sort_by(f64::total_cmp);
        points.extend(kinks.into_iter().filter(|&k| k > lo2 && k < hi2));
        points.push(hi2);

        let mut d2 = hi2;
        for pair in points.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            if slope(q) < 0.0 {
                continue;
            }
            let probe = if q.is_finite() { 0.5 * (p + q) } else { p + 1.0 + p.abs() };
            let strong = strong_given(probe);
            let interior = strong > lo1 && strong < hi1;
            let root = if interior {
                if gap > 0.0 {
                    tau * ((w2 - w1) / (LN_2 * gap)).log2()
                } else {
                    // Constant slope on this piece: the sign flips at q.
                    q
                }
            } else {
                // d1 pinned at `strong`: ln2·2^{d2/τ}(a1 2^{c/τ} + a2 − a1) = w2.
                let e = strong / tau;
                let log_mix = e + (a1 + gap * (-LN_2 * e).exp()).log2();
                tau * ((w2 / LN_2).log2() - log_mix)
            };
            d2 = if root.is_nan() { q } else { root.max(p).min(q) };
            break;
        }
        d2
    };
    [strong_given(d2), d2]
}

fn check_dims(instance: &ProblemInstance, t: &[f64]) -> Result<(), DataError> {
    if t.len() != instance.num_groups() {
        return Err(DataError::DimensionMismatch {
            expected: instance.num_groups(),
            got: t.len(),
        });
    }
    Ok(())
}

fn responses(instance: &ProblemInstance, boxes: &[OffloadBox], t: &[f64], beta: f64) -> Vec<[f64; 2]> {
    instance
        .groups()
        .iter()
        .zip(boxes.iter().zip(t))
        .map(|(g, (bx, &ti))| {
            if ti > 0.0 {
                best_response(g, bx, ti, instance.bandwidth(), beta)
            } else {
                bx.lower
            }
        })
        .collect()
}

/// Cloud cycles `ΣΣ d_ij(β)·C_ij` of the groups' best responses at `beta`.
pub fn cloud_load(instance: &ProblemInstance, t: &[f64], beta: f64) -> f64 {
    let boxes = instance.offload_boxes();
    instance.cloud_cycles(&responses(instance, &boxes, t, beta))
}

/// Optimal offloaded bits for fixed time shares `t`.
///
/// If the unpriced responses fit in the cloud they are optimal and `β = 0`.
/// Otherwise `β` is bisected to full precision and the responses at the two
/// ends of the final bracket are mixed so that the load equals the capacity.
/// Both ends minimise the Lagrangian at (numerically) the same price, so the
/// mixture does too; this matters where the load jumps, e.g. for groups with
/// equal channels.
pub fn solve_data(instance: &ProblemInstance, t: &[f64]) -> Result<DataSolution, DataError> {
    check_dims(instance, t)?;
    let boxes = instance.offload_boxes();
    for (i, (bx, &ti)) in boxes.iter().zip(t).enumerate() {
        if !(ti > 0.0) && (bx.lower[0] > 0.0 || bx.lower[1] > 0.0) {
            return Err(DataError::GroupNeedsTime { group: i });
        }
    }
    let capacity = instance.cloud_capacity();
    let load = |d: &[[f64; 2]]| instance.cloud_cycles(d);

    let free = responses(instance, &boxes, t, 0.0);
    if load(&free) <= capacity {
        return Ok(DataSolution {
            d: free,
            beta: 0.0,
            search_iterations: 0,
        });
    }

    let mut hi = instance
        .groups()
        .iter()
        .flat_map(|g| g.users())
        .map(|u| u.energy_per_cycle)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut hi_d = responses(instance, &boxes, t, hi);
    let mut iterations = 0;
    while load(&hi_d) > capacity {
        hi *= 2.0;
        hi_d = responses(instance, &boxes, t, hi);
        iterations += 1;
        if iterations > MAX_SEARCH_ITERATIONS || !hi.is_finite() {
            return Err(DataError::Infeasible);
        }
    }

    let mut lo = 0.0;
    let mut lo_d: Option<Vec<[f64; 2]>> = None;
    let mut hi_load = load(&hi_d);
    for _ in 0..MAX_SEARCH_ITERATIONS {
        if hi_load == capacity || hi - lo <= BETA_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let d = responses(instance, &boxes, t, mid);
        let l = load(&d);
        if l > capacity {
            lo = mid;
            lo_d = Some(d);
        } else {
            hi = mid;
            hi_d = d;
            hi_load = l;
        }
    }

    let d = match lo_d {
        Some(lo_d) if hi_load < capacity => {
            let lo_load = load(&lo_d);
            let theta = (capacity - hi_load) / (lo_load - hi_load);
            hi_d.iter()
                .zip(&lo_d)
                .zip(&boxes)
                .map(|((h, l), bx)| {
                    let mix = |j: usize| bx.clamp(j, h[j] + theta * (l[j] - h[j]));
                    [mix(0), mix(1)]
                })
                .collect()
        }
        _ => hi_d,
    };
    Ok(DataSolution {
        d,
        beta: hi,
        search_iterations: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::UserProfile;
    use approx::assert_relative_eq;

    /// a1 = 1, a2 = 2, C1 = C2 = 1, P1 = 1, P2 = 2.
    fn unit_group() -> NomaGroup {
        let u = |h, p| UserProfile {
            data_bits: 10.0,
            cycles_per_bit: 1.0,
            energy_per_cycle: p,
            local_capacity: 100.0,
            channel_gain: h,
        };
        NomaGroup::new(u(1.0, 1.0), u(0.5, 2.0), 1.0)
    }

    fn unit_box() -> OffloadBox {
        OffloadBox {
            lower: [0.0, 0.0],
            upper: [10.0, 10.0],
        }
    }

    /// Brute-force minimiser of the priced group problem on a fine grid.
    fn grid_min(group: &NomaGroup, bx: &OffloadBox, t: f64, b: f64, beta: f64, n: usize) -> ([f64; 2], f64) {
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in 0..=n {
            for j in 0..=n {
                let d1 = bx.lower[0] + (bx.upper[0] - bx.lower[0]) * i as f64 / n as f64;
                let d2 = bx.lower[1] + (bx.upper[1] - bx.lower[1]) * j as f64 / n as f64;
                let v = group_lagrangian(group, [d1, d2], t, b, beta);
                if v < best.1 {
                    best = ([d1, d2], v);
                }
            }
        }
        best
    }

    #[test]
    fn closed_forms_at_zero_price() {
        let g = unit_group();
        let bx = unit_box();
        assert_eq!(d1_of_beta(&g, &bx, 1.0, 1.0, 0.0).unwrap(), 0.0);
        let d2 = d2_of_beta(&g, &bx, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(d2, (1.0 / LN_2).log2(), max_relative = 1e-14);
        assert_relative_eq!(d2, 0.528_766_372_944_897_6, max_relative = 1e-14);
    }

    #[test]
    fn strong_user_clamps_low_when_price_hits_local_cost() {
        let g = unit_group();
        let bx = OffloadBox {
            lower: [0.5, 0.0],
            upper: [10.0, 10.0],
        };
        assert_eq!(d1_of_beta(&g, &bx, 1.0, 1.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn strong_user_clamps_high() {
        let u = |h, p| UserProfile {
            data_bits: 10.0,
            cycles_per_bit: 1.0,
            energy_per_cycle: p,
            local_capacity: 100.0,
            channel_gain: h,
        };
        // Unclamped: 50·log2(4 / (5 − 4)) = 100 bits.
        let g = NomaGroup::new(u(1.0, 4.0), u(0.5, 5.0), 1.0);
        let bx = OffloadBox {
            lower: [0.0, 0.0],
            upper: [1e-3, 10.0],
        };
        assert_eq!(d1_of_beta(&g, &bx, 50.0, 1.0, 0.0).unwrap(), 1e-3);
    }

    #[test]
    fn weak_user_constant_in_price_for_equal_cycles() {
        let g = unit_group();
        let bx = unit_box();
        let a = d2_of_beta(&g, &bx, 1.0, 1.0, 0.0).unwrap();
        let b = d2_of_beta(&g, &bx, 1.0, 1.0, 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_groups_rejected_by_closed_forms() {
        let u = UserProfile {
            data_bits: 1.0,
            cycles_per_bit: 1.0,
            energy_per_cycle: 1.0,
            local_capacity: 1.0,
            channel_gain: 1.0,
        };
        let g = NomaGroup::new(u, u, 1.0);
        assert_eq!(d1_of_beta(&g, &unit_box(), 1.0, 1.0, 0.0), Err(DataError::Degenerate));
        assert_eq!(d2_of_beta(&g, &unit_box(), 1.0, 1.0, 0.0), Err(DataError::Degenerate));
    }

    #[test]
    fn best_response_matches_closed_forms_when_interior() {
        let g = unit_group();
        let bx = OffloadBox {
            lower: [0.0, 0.0],
            upper: [10.0, 10.0],
        };
        // Higher strong-user saving keeps both coordinates interior.
        let u = |h, p| UserProfile {
            data_bits: 10.0,
            cycles_per_bit: 1.0,
            energy_per_cycle: p,
            local_capacity: 100.0,
            channel_gain: h,
        };
        let g2 = NomaGroup::new(u(1.0, 3.0), u(0.5, 5.0), 1.0);
        let r = best_response(&g2, &bx, 1.0, 1.0, 0.0);
        assert_relative_eq!(r[0], d1_of_beta(&g2, &bx, 1.0, 1.0, 0.0).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(r[1], d2_of_beta(&g2, &bx, 1.0, 1.0, 0.0).unwrap(), max_relative = 1e-12);
        let r0 = best_response(&g, &bx, 1.0, 1.0, 0.0);
        assert!(r0[0].abs() < 1e-12);
    }

    #[test]
    fn best_response_beats_grid_in_every_regime() {
        let u = |h, p, c, r| UserProfile {
            data_bits: r,
            cycles_per_bit: c,
            energy_per_cycle: p,
            local_capacity: 100.0,
            channel_gain: h,
        };
        let cases = [
            NomaGroup::new(u(1.0, 3.0, 1.0, 4.0), u(0.5, 5.0, 1.0, 4.0), 1.0),
            NomaGroup::new(u(1.0, 3.0, 2.0, 1.0), u(0.2, 1.0, 0.5, 6.0), 1.0),
            NomaGroup::new(u(1.0, 0.5, 1.0, 4.0), u(0.9, 8.0, 1.0, 3.0), 1.0),
            NomaGroup::new(u(1.0, 6.0, 1.0, 4.0), u(1.0, 3.0, 1.0, 3.0), 1.0),
            NomaGroup::new(u(1.0, 3.0, 1.0, 4.0), u(1.0, 3.0, 1.0, 3.0), 1.0),
        ];
        for g in &cases {
            for &(lo1, lo2) in &[(0.0f64, 0.0f64), (0.5, 1.0), (2.0, 0.0)] {
                let bx = OffloadBox {
                    lower: [lo1.min(g.user1().data_bits), lo2.min(g.user2().data_bits)],
                    upper: [g.user1().data_bits, g.user2().data_bits],
                };
                for &(t, beta) in &[(1.0, 0.0), (0.5, 0.4), (3.0, 1.5), (0.2, 0.0)] {
                    let r = best_response(g, &bx, t, 1.0, beta);
                    let v = group_lagrangian(g, r, t, 1.0, beta);
                    let (_, grid) = grid_min(g, &bx, t, 1.0, beta, 400);
                    assert!(v <= grid + 1e-12 * grid.abs().max(1.0), "{g:?} {bx:?} t={t} beta={beta}: {v} > {grid}");
                    for j in 0..2 {
                        assert!(r[j] >= bx.lower[j] && r[j] <= bx.upper[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn unbounded_box_response_is_finite() {
        let u = |h, p| UserProfile {
            data_bits: 10.0,
            cycles_per_bit: 1.0,
            energy_per_cycle: p,
            local_capacity: 100.0,
            channel_gain: h,
        };
        let g = NomaGroup::new(u(1.0, 3.0), u(0.5, 5.0), 1.0);
        let bx = OffloadBox {
            lower: [0.0, 0.0],
            upper: [f64::INFINITY, f64::INFINITY],
        };
        let r = best_response(&g, &bx, 1.0, 1.0, 0.0);
        assert!(r[0].is_finite() && r[1].is_finite());
        assert_relative_eq!(r[0], d1_of_beta(&g, &bx, 1.0, 1.0, 0.0).unwrap(), max_relative = 1e-12);
    }
}
