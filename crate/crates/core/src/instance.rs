//! Problem data: users, NOMA groups, system constants and allocations.
//!
//! All quantities are SI: bits, cycles, seconds, hertz, watts, joules. The
//! noise power spectral density is stored as linear W/Hz.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-user computation task and channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    /// Input data size `R` in bits.
    pub data_bits: f64,
    /// CPU cycles needed per input bit `C`.
    pub cycles_per_bit: f64,
    /// Local energy per CPU cycle `P`, joules.
    pub energy_per_cycle: f64,
    /// Local CPU capacity in cycles per second.
    pub local_capacity: f64,
    /// Linear uplink power gain to the base station.
    pub channel_gain: f64,
}

impl UserProfile {
    /// Local energy per bit kept on the device, `C·P`.
    pub fn local_cost_per_bit(&self) -> f64 {
        self.cycles_per_bit * self.energy_per_cycle
    }

    fn field_values(&self) -> [(&'static str, f64); 5] {
        [
            ("data_bits", self.data_bits),
            ("cycles_per_bit", self.cycles_per_bit),
            ("energy_per_cycle", self.energy_per_cycle),
            ("local_capacity", self.local_capacity),
            ("channel_gain", self.channel_gain),
        ]
    }
}

/// Bits that cannot be processed locally before the deadline:
/// `max{(R·C − F_local·T)/C, 0}`.
pub fn min_offload_bits(user: &UserProfile, deadline: f64) -> f64 {
    debug_assert!(deadline > 0.0);
    let excess_cycles = user.data_bits * user.cycles_per_bit - user.local_capacity * deadline;
    if excess_cycles <= 0.0 {
        return 0.0;
    }
    (excess_cycles / user.cycles_per_bit).min(user.data_bits)
}

/// Two users sharing one time slice through superposition, strong user first.
///
/// `a1`, `a2` are the noise-over-gain coefficients `σ²/h`. They are derived
/// on construction and never serialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaGroup {
    user1: UserProfile,
    user2: UserProfile,
    a1: f64,
    a2: f64,
}

impl NomaGroup {
    pub fn new(user1: UserProfile, user2: UserProfile, noise_psd: f64) -> Self {
        Self {
            user1,
            user2,
            a1: noise_psd / user1.channel_gain,
            a2: noise_psd / user2.channel_gain,
        }
    }

    pub fn user1(&self) -> &UserProfile {
        &self.user1
    }

    pub fn user2(&self) -> &UserProfile {
        &self.user2
    }

    pub fn users(&self) -> [&UserProfile; 2] {
        [&self.user1, &self.user2]
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    /// Equal channels make the offload energy a function of `d1 + d2` only.
    pub fn is_degenerate(&self) -> bool {
        self.a1 == self.a2
    }

    /// Sum of both users' input data.
    pub fn total_bits(&self) -> f64 {
        self.user1.data_bits + self.user2.data_bits
    }
}

/// Per-group box `[D_ij, R_ij]` on offloaded bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl OffloadBox {
    pub fn for_group(group: &NomaGroup, deadline: f64) -> Self {
        Self {
            lower: [
                min_offload_bits(group.user1(), deadline),
                min_offload_bits(group.user2(), deadline),
            ],
            upper: [group.user1().data_bits, group.user2().data_bits],
        }
    }

    pub fn clamp(&self, j: usize, value: f64) -> f64 {
        value.max(self.lower[j]).min(self.upper[j])
    }

    pub fn is_pinned(&self) -> bool {
        self.lower == self.upper
    }
}

/// Full problem: groups plus bandwidth, noise, deadline and cloud capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    groups: Vec<NomaGroup>,
    bandwidth: f64,
    noise_psd: f64,
    deadline: f64,
    cloud_capacity: f64,
}

impl ProblemInstance {
    /// Builds the instance and derives `a_ij` for every user. No validation
    /// happens here; see [`ProblemInstance::validate`].
    pub fn new(
        pairs: Vec<(UserProfile, UserProfile)>,
        bandwidth: f64,
        noise_psd: f64,
        deadline: f64,
        cloud_capacity: f64,
    ) -> Self {
        let groups = pairs
            .into_iter()
            .map(|(u1, u2)| NomaGroup::new(u1, u2, noise_psd))
            .collect();
        Self {
            groups,
            bandwidth,
            noise_psd,
            deadline,
            cloud_capacity,
        }
    }

    pub fn groups(&self) -> &[NomaGroup] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn noise_psd(&self) -> f64 {
        self.noise_psd
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    pub fn cloud_capacity(&self) -> f64 {
        self.cloud_capacity
    }

    /// Copy with a different deadline; `D_ij` move with it.
    pub fn with_deadline(&self, deadline: f64) -> Self {
        Self {
            deadline,
            ..self.clone()
        }
    }

    pub fn with_cloud_capacity(&self, cloud_capacity: f64) -> Self {
        Self {
            cloud_capacity,
            ..self.clone()
        }
    }

    pub fn offload_box(&self, group: usize) -> OffloadBox {
        OffloadBox::for_group(&self.groups[group], self.deadline)
    }

    pub fn offload_boxes(&self) -> Vec<OffloadBox> {
        (0..self.groups.len()).map(|i| self.offload_box(i)).collect()
    }

    /// `D_ij` for every user, the starting point of the coordinate solver.
    pub fn mandatory_offload(&self) -> Vec<[f64; 2]> {
        self.offload_boxes().iter().map(|b| b.lower).collect()
    }

    /// Cloud cycles consumed when every user offloads exactly `D_ij`.
    pub fn mandatory_cloud_cycles(&self) -> f64 {
        self.cloud_cycles(&self.mandatory_offload())
    }

    /// `ΣΣ d_ij·C_ij`.
    pub fn cloud_cycles(&self, d: &[[f64; 2]]) -> f64 {
        self.groups
            .iter()
            .zip(d)
            .map(|(g, di)| di[0] * g.user1().cycles_per_bit + di[1] * g.user2().cycles_per_bit)
            .sum()
    }

    /// Local energy if nothing is offloaded, `Σ R·C·P`.
    pub fn all_local_energy(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.users())
            .map(|u| u.data_bits * u.local_cost_per_bit())
            .sum()
    }

    /// Checks every physical invariant and global feasibility.
    ///
    /// On success returns the non-fatal warnings (degenerate groups). Any
    /// hard violation yields [`InvalidInstance`] listing all of them.
    pub fn validate(&self) -> Result<Vec<Diagnostic>, InvalidInstance> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();

        if self.groups.is_empty() {
            errors.push(Diagnostic::NoGroups);
        }
        let system = [
            ("bandwidth_hz", self.bandwidth, false),
            ("noise_psd_w_per_hz", self.noise_psd, false),
            ("deadline_s", self.deadline, false),
            ("cloud_capacity_cycles", self.cloud_capacity, true),
        ];
        for (field, value, zero_ok) in system {
            let ok = value.is_finite() && (value > 0.0 || (zero_ok && value == 0.0));
            if !ok {
                errors.push(Diagnostic::SystemField { field, value });
            }
        }

        for (i, group) in self.groups.iter().enumerate() {
            for (j, user) in group.users().into_iter().enumerate() {
                for (field, value) in user.field_values() {
                    let ok = value.is_finite()
                        && match field {
                            "data_bits" | "energy_per_cycle" => value >= 0.0,
                            _ => value > 0.0,
                        };
                    if !ok {
                        errors.push(Diagnostic::UserField {
                            group: i,
                            user: j,
                            field,
                            value,
                        });
                    }
                }
            }
            let (h1, h2) = (group.user1().channel_gain, group.user2().channel_gain);
            if h1 < h2 {
                errors.push(Diagnostic::OrderingViolated { group: i });
            } else if group.is_degenerate() {
                warnings.push(Diagnostic::DegenerateGroup { group: i });
            }
        }

        // Feasibility only makes sense once the fields themselves are sane.
        if errors.is_empty() {
            let mandatory = self.mandatory_cloud_cycles();
            if mandatory > self.cloud_capacity {
                errors.push(Diagnostic::Infeasible {
                    mandatory_cycles: mandatory,
                    cloud_capacity: self.cloud_capacity,
                });
            }
        }

        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(InvalidInstance { diagnostics: errors })
        }
    }
}

/// One finding from [`ProblemInstance::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoGroups,
    SystemField {
        field: &'static str,
        value: f64,
    },
    UserField {
        group: usize,
        user: usize,
        field: &'static str,
        value: f64,
    },
    OrderingViolated {
        group: usize,
    },
    DegenerateGroup {
        group: usize,
    },
    Infeasible {
        mandatory_cycles: f64,
        cloud_capacity: f64,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoGroups => write!(f, "instance has no groups"),
            Diagnostic::SystemField { field, value } => {
                write!(f, "invalid system field {field} = {value}")
            }
            Diagnostic::UserField {
                group,
                user,
                field,
                value,
            } => write!(
                f,
                "invalid user field {field} = {value}, group {group}, user {}",
                user + 1
            ),
            Diagnostic::OrderingViolated { group } => {
                write!(f, "ordering violated, group {group}")
            }
            Diagnostic::DegenerateGroup { group } => {
                write!(f, "degenerate group {group}: equal channel gains")
            }
            Diagnostic::Infeasible {
                mandatory_cycles,
                cloud_capacity,
            } => write!(
                f,
                "infeasible: mandatory offload exceeds cloud capacity ({mandatory_cycles:e} > {cloud_capacity:e} cycles)"
            ),
        }
    }
}

/// Hard validation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid instance: {}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidInstance {
    pub diagnostics: Vec<Diagnostic>,
}

impl InvalidInstance {
    /// True when the only problem is the cloud-capacity conflict.
    pub fn is_infeasible(&self) -> bool {
        self.diagnostics
            .iter()
            .all(|d| matches!(d, Diagnostic::Infeasible { .. }))
    }
}

/// Decision vector: time share per group and offloaded bits per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub t: Vec<f64>,
    pub d: Vec<[f64; 2]>,
}

impl Allocation {
    pub fn new(t: Vec<f64>, d: Vec<[f64; 2]>) -> Self {
        debug_assert_eq!(t.len(), d.len());
        Self { t, d }
    }

    pub fn total_time(&self) -> f64 {
        self.t.iter().sum()
    }

    /// Largest constraint violation, relative to the scale of each
    /// constraint. Zero for a feasible allocation.
    pub fn violation(&self, instance: &ProblemInstance) -> f64 {
        let mut worst: f64 = 0.0;
        let deadline = instance.deadline();
        worst = worst.max((self.total_time() - deadline) / deadline);
        let capacity = instance.cloud_capacity().max(f64::MIN_POSITIVE);
        worst = worst.max((instance.cloud_cycles(&self.d) - instance.cloud_capacity()) / capacity);
        for (i, group) in instance.groups().iter().enumerate() {
            let bx = instance.offload_box(i);
            if self.t[i] < 0.0 {
                worst = worst.max(-self.t[i] / deadline);
            }
            for j in 0..2 {
                let scale = group.users()[j].data_bits.max(1.0);
                worst = worst.max((bx.lower[j] - self.d[i][j]) / scale);
                worst = worst.max((self.d[i][j] - bx.upper[j]) / scale);
            }
            if self.t[i] == 0.0 && (self.d[i][0] > 0.0 || self.d[i][1] > 0.0) {
                worst = f64::INFINITY;
            }
        }
        worst
    }

    /// All constraints of the problem hold up to `rel_tol`.
    pub fn is_feasible(&self, instance: &ProblemInstance, rel_tol: f64) -> bool {
        self.t.len() == instance.num_groups()
            && self.d.len() == instance.num_groups()
            && self.violation(instance) <= rel_tol
    }
}
