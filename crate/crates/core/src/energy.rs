//! Closed-form physical quantities: NOMA transmit powers, offload energy,
//! local computing energy and the time-derivative of a group's offload
//! energy.
//!
//! Every exponential goes through `exp(ln2·x)` with `x = bits / (B·t)`.
//! Arguments past [`MAX_EXPONENT`] are reported as [`EnergyError::PowerOverflow`]
//! instead of producing infinities.

use std::f64::consts::LN_2;

use crate::instance::{Allocation, NomaGroup, ProblemInstance, UserProfile};

/// Largest admissible `ln2·x` before `exp` is considered overflowed.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("zero time, positive data in group {group}")]
    ZeroTimePositiveData { group: usize },
    #[error("power overflow in group {group}: rate exponent {exponent:e}")]
    PowerOverflow { group: usize, exponent: f64 },
    #[error("non-positive time {t:e}")]
    NonPositiveTime { t: f64 },
    #[error("allocation has {got} groups, instance has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl EnergyError {
    fn in_group(self, group: usize) -> Self {
        match self {
            EnergyError::ZeroTimePositiveData { .. } => EnergyError::ZeroTimePositiveData { group },
            EnergyError::PowerOverflow { exponent, .. } => {
                EnergyError::PowerOverflow { group, exponent }
            }
            other => other,
        }
    }
}

/// Energy breakdown of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub offload_energy: Vec<f64>,
    pub local_energy: Vec<[f64; 2]>,
    pub powers: Vec<[f64; 2]>,
    pub total: f64,
}

impl EnergyReport {
    pub fn total_offload(&self) -> f64 {
        self.offload_energy.iter().sum()
    }

    pub fn total_local(&self) -> f64 {
        self.local_energy.iter().map(|e| e[0] + e[1]).sum()
    }
}

/// `(R − d)·C·P`.
pub fn local_energy(user: &UserProfile, d: f64) -> f64 {
    debug_assert!(
        d >= 0.0 && d <= user.data_bits * (1.0 + 1e-12),
        "offload {d} outside [0, {}]",
        user.data_bits
    );
    (user.data_bits - d) * user.cycles_per_bit * user.energy_per_cycle
}

/// Scaled exponents `ln2·(d1+d2)/(B t)` and `ln2·d2/(B t)`.
fn exponents(d1: f64, d2: f64, t: f64, bandwidth: f64) -> Result<(f64, f64), EnergyError> {
    let scale = LN_2 / (bandwidth * t);
    let sum = (d1 + d2) * scale;
    let weak = d2 * scale;
    if !(sum <= MAX_EXPONENT) {
        return Err(EnergyError::PowerOverflow {
            group: 0,
            exponent: sum,
        });
    }
    Ok((sum, weak))
}

/// Transmit powers that deliver `d1`, `d2` bits in time `t` under SIC
/// decoding (strong user decoded first, weak user interference-free).
pub fn offload_powers(
    group: &NomaGroup,
    d1: f64,
    d2: f64,
    t: f64,
    bandwidth: f64,
) -> Result<(f64, f64), EnergyError> {
    if t <= 0.0 {
        return if d1 + d2 > 0.0 {
            Err(EnergyError::ZeroTimePositiveData { group: 0 })
        } else {
            Ok((0.0, 0.0))
        };
    }
    let (ws, w2) = exponents(d1, d2, t, bandwidth)?;
    // 2^s − 2^y = 2^y (2^(s−y) − 1)
    let p1 = group.a1() * bandwidth * w2.exp() * (ws - w2).exp_m1();
    let p2 = group.a2() * bandwidth * w2.exp_m1();
    Ok((p1, p2))
}

/// Offload energy of a group, `B t (a1 2^{(d1+d2)/Bt} + (a2−a1) 2^{d2/Bt} − a2)`.
///
/// Zero when `t = 0` and no data is sent.
pub fn group_offload_energy(
    group: &NomaGroup,
    d1: f64,
    d2: f64,
    t: f64,
    bandwidth: f64,
) -> Result<f64, EnergyError> {
    if t <= 0.0 {
        return if d1 + d2 > 0.0 {
            Err(EnergyError::ZeroTimePositiveData { group: 0 })
        } else {
            Ok(0.0)
        };
    }
    let (ws, w2) = exponents(d1, d2, t, bandwidth)?;
    Ok(bandwidth * t * (group.a1() * ws.exp_m1() + (group.a2() - group.a1()) * w2.exp_m1()))
}

/// `(1 − w) e^w − 1`, accurate for small `w` where the direct form cancels.
fn slope_term(w: f64) -> f64 {
    if w.abs() < 0.25 {
        // Σ_{k≥2} (1 − k) w^k / k!
        let mut term = w; // w^k / k! at k = 1
        let mut sum = 0.0;
        for k in 2..40 {
            term *= w / k as f64;
            let add = (1.0 - k as f64) * term;
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (1.0 - w) * w.exp() - 1.0
    }
}

/// Derivative of the group's offload energy with respect to its time share.
///
/// Negative for any positive data and increasing in `t`, tending to zero as
/// `t → ∞`. Identically zero when `d1 + d2 = 0`.
pub fn g_prime(
    group: &NomaGroup,
    d1: f64,
    d2: f64,
    bandwidth: f64,
    t: f64,
) -> Result<f64, EnergyError> {
    if !(t > 0.0) {
        return Err(EnergyError::NonPositiveTime { t });
    }
    if d1 + d2 == 0.0 {
        return Ok(0.0);
    }
    let (ws, w2) = exponents(d1, d2, t, bandwidth)?;
    Ok(bandwidth * (group.a1() * slope_term(ws) + (group.a2() - group.a1()) * slope_term(w2)))
}

/// `g_prime` without the overflow guard: overflowed exponents map to `−∞`,
/// which is the correct order relation for bracketing.
pub(crate) fn g_prime_saturating(group: &NomaGroup, d1: f64, d2: f64, bandwidth: f64, t: f64) -> f64 {
    match g_prime(group, d1, d2, bandwidth, t) {
        Ok(v) => v,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Objective of the full problem: offload energy of every group plus local
/// energy of every user.
pub fn total_objective(instance: &ProblemInstance, alloc: &Allocation) -> Result<f64, EnergyError> {
    Ok(energy_report(instance, alloc)?.total)
}

pub fn energy_report(instance: &ProblemInstance, alloc: &Allocation) -> Result<EnergyReport, EnergyError> {
    let n = instance.num_groups();
    if alloc.t.len() != n || alloc.d.len() != n {
        return Err(EnergyError::DimensionMismatch {
            expected: n,
            got: alloc.t.len().min(alloc.d.len()),
        });
    }
    let bandwidth = instance.bandwidth();
    let mut report = EnergyReport {
        offload_energy: Vec::with_capacity(n),
        local_energy: Vec::with_capacity(n),
        powers: Vec::with_capacity(n),
        total: 0.0,
    };
    for (i, group) in instance.groups().iter().enumerate() {
        let [d1, d2] = alloc.d[i];
        let t = alloc.t[i];
        let e = group_offload_energy(group, d1, d2, t, bandwidth).map_err(|e| e.in_group(i))?;
        let (p1, p2) = offload_powers(group, d1, d2, t, bandwidth).map_err(|e| e.in_group(i))?;
        let local = [local_energy(group.user1(), d1), local_energy(group.user2(), d2)];
        report.total += e + local[0] + local[1];
        report.offload_energy.push(e);
        report.local_energy.push(local);
        report.powers.push([p1, p2]);
    }
    Ok(report)
}
