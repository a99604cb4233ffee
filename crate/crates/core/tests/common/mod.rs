#![allow(dead_code)]

use noma_mec::instance::{Allocation, ProblemInstance, UserProfile};
use noma_mec::scenario::{generate, ScenarioSpec};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const NOISE: f64 = 1.2589254117941673e-20;

/// Gains between 1e-14 and 1e-10, strong user first.
pub fn gains() -> impl Strategy<Value = (f64, f64)> {
    (-14.0f64..-10.0, -14.0f64..-10.0).prop_map(|(a, b)| {
        let (x, y) = (10f64.powf(a), 10f64.powf(b));
        (x.max(y), x.min(y))
    })
}

pub fn user_with_gain(h: f64) -> impl Strategy<Value = UserProfile> {
    (1e4f64..5e5, 500.0f64..1500.0, 0.5e-10f64..2e-10, 1e8f64..2e9).prop_map(move |(r, c, p, f)| UserProfile {
        data_bits: r,
        cycles_per_bit: c,
        energy_per_cycle: p,
        local_capacity: f,
        channel_gain: h,
    })
}

pub fn pair() -> impl Strategy<Value = (UserProfile, UserProfile)> {
    gains().prop_flat_map(|(h1, h2)| (user_with_gain(h1), user_with_gain(h2)))
}

/// Random instance with `1..=max_groups` groups whose cloud capacity sits a
/// fraction `u ∈ [0.1, 1.2]` of the way from the mandatory load to the full
/// load, so it is always feasible and binds in a good share of cases.
pub fn instance(max_groups: usize) -> impl Strategy<Value = ProblemInstance> {
    (prop::collection::vec(pair(), 1..=max_groups), 0.03f64..0.2, 0.1f64..1.2).prop_map(|(pairs, deadline, u)| {
        let base = ProblemInstance::new(pairs, 1e7, NOISE, deadline, 0.0);
        base.with_cloud_capacity(demand_relative(&base, u))
    })
}

/// `ΣDC + u·(ΣRC − ΣDC)`.
pub fn demand_relative(instance: &ProblemInstance, u: f64) -> f64 {
    let floor = instance.mandatory_cloud_cycles();
    let full: f64 = instance
        .groups()
        .iter()
        .flat_map(|g| g.users())
        .map(|u| u.data_bits * u.cycles_per_bit)
        .sum();
    floor + u * (full - floor)
}

/// Generated cell with `n_users` users and demand-relative capacity.
pub fn cell(n_users: usize, seed: u64, u: f64) -> ProblemInstance {
    let base = generate(&ScenarioSpec {
        n_users,
        ..ScenarioSpec::default()
    }
    .with_seed(seed))
    .expect("default scenario is valid");
    base.with_cloud_capacity(demand_relative(&base, u))
}

/// Random point satisfying every constraint, with the deadline fully used.
pub fn random_feasible(instance: &ProblemInstance, rng: &mut ChaCha8Rng) -> Allocation {
    let n = instance.num_groups();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let t = w.iter().map(|x| x / total * instance.deadline()).collect();
    // Mix the mandatory offloads with a random point of the box, pulling
    // back towards the mandatory ones until the cloud fits.
    let boxes = instance.offload_boxes();
    let raw: Vec<[f64; 2]> = boxes
        .iter()
        .map(|b| [rng.random_range(b.lower[0]..=b.upper[0]), rng.random_range(b.lower[1]..=b.upper[1])])
        .collect();
    let floor = instance.mandatory_cloud_cycles();
    let load = instance.cloud_cycles(&raw);
    let keep = if load > instance.cloud_capacity() {
        (instance.cloud_capacity() - floor) / (load - floor)
    } else {
        1.0
    };
    let d = raw
        .iter()
        .zip(&boxes)
        .map(|(r, b)| [b.lower[0] + keep * (r[0] - b.lower[0]), b.lower[1] + keep * (r[1] - b.lower[1])])
        .collect();
    Allocation::new(t, d)
}
