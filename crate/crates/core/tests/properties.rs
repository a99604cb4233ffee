mod common;

use std::f64::consts::LN_2;

use common::{cell, instance, pair, random_feasible, NOISE};
use noma_mec::baselines::{equal_resource_solve, oma_solve};
use noma_mec::data_alloc::{cloud_load, solve_data};
use noma_mec::energy::{g_prime, group_offload_energy, offload_powers, total_objective};
use noma_mec::instance::{min_offload_bits, Allocation, NomaGroup, ProblemInstance};
use noma_mec::scenario::{generate, instance_to_json, ScenarioSpec};
use noma_mec::solver::{solve, solve_from, SolverOptions};
use noma_mec::time_alloc::{solve_time, time_demand};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const B: f64 = 1e7;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Offloads with the rate exponent of the sum kept below `max_rate` bits
/// per second per hertz, so nothing overflows.
fn bits_for(t: f64, x1: f64, x2: f64, max_rate: f64) -> (f64, f64) {
    (x1 * max_rate * B * t / 2.0, x2 * max_rate * B * t / 2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn min_offload_bits_is_monotone((u, _) in pair(), t in 0.01f64..0.5, k in 1.01f64..3.0) {
        let d = min_offload_bits(&u, t);
        prop_assert!((0.0..=u.data_bits).contains(&d));
        prop_assert!(min_offload_bits(&u, t * k) <= d);
        let faster = noma_mec::UserProfile { local_capacity: u.local_capacity * k, ..u };
        prop_assert!(min_offload_bits(&faster, t) <= d);
        let bigger = noma_mec::UserProfile { data_bits: u.data_bits * k, ..u };
        prop_assert!(min_offload_bits(&bigger, t) >= d);
    }

    #[test]
    fn energy_is_time_times_power((u1, u2) in pair(), t in 1e-4f64..0.1, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let g = NomaGroup::new(u1, u2, NOISE);
        let (d1, d2) = bits_for(t, x1, x2, 20.0);
        let e = group_offload_energy(&g, d1, d2, t, B).unwrap();
        let (p1, p2) = offload_powers(&g, d1, d2, t, B).unwrap();
        prop_assert!(rel(e, t * (p1 + p2)) <= 1e-12, "{e} vs {}", t * (p1 + p2));
    }

    #[test]
    fn energy_is_a_perspective((u1, u2) in pair(), t in 1e-4f64..0.1, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let g = NomaGroup::new(u1, u2, NOISE);
        let (d1, d2) = bits_for(t, x1, x2, 20.0);
        let f = |r1: f64, r2: f64| g.a1() * (2f64.powf(r1 + r2) - 1.0) + (g.a2() - g.a1()) * (2f64.powf(r2) - 1.0);
        let direct = B * t * f(d1 / (B * t), d2 / (B * t));
        let e = group_offload_energy(&g, d1, d2, t, B).unwrap();
        prop_assert!(rel(e, direct) <= 1e-12 || (e - direct).abs() <= 1e-300);
    }

    #[test]
    fn time_energy_is_decreasing_and_convex((u1, u2) in pair(), x1 in 0.01f64..1.0, x2 in 0.0f64..1.0) {
        let g = NomaGroup::new(u1, u2, NOISE);
        let (d1, d2) = bits_for(1e-3, x1, x2, 20.0);
        let ts: Vec<f64> = (0..40).map(|k| 1e-3 * 1.2f64.powi(k)).collect();
        let e: Vec<f64> = ts.iter().map(|&t| group_offload_energy(&g, d1, d2, t, B).unwrap()).collect();
        let s: Vec<f64> = ts.iter().map(|&t| g_prime(&g, d1, d2, B, t).unwrap()).collect();
        for k in 1..ts.len() {
            prop_assert!(e[k] < e[k - 1]);
            prop_assert!(s[k] > s[k - 1] && s[k] < 0.0);
        }
        for k in 1..ts.len() - 1 {
            // Chords lie above the curve on the non-uniform grid.
            let w = (ts[k] - ts[k - 1]) / (ts[k + 1] - ts[k - 1]);
            prop_assert!(e[k] <= (1.0 - w) * e[k - 1] + w * e[k + 1] + 1e-15 * e[k - 1]);
        }
    }

    #[test]
    fn offload_gradient_matches_finite_differences((u1, u2) in pair(), t in 0.01f64..0.05, x1 in 0.05f64..0.95, x2 in 0.05f64..0.95) {
        let g = NomaGroup::new(u1, u2, NOISE);
        let (d1, d2) = (x1 * u1.data_bits, x2 * u2.data_bits);
        let inst = ProblemInstance::new(vec![(u1, u2)], B, NOISE, 0.1, 1e12);
        let v = |a: f64, b: f64| total_objective(&inst, &Allocation::new(vec![t], vec![[a, b]])).unwrap();
        let tau = B * t;
        let sum = LN_2 * g.a1() * 2f64.powf((d1 + d2) / tau);
        let analytic = [
            sum - u1.cycles_per_bit * u1.energy_per_cycle,
            sum + LN_2 * (g.a2() - g.a1()) * 2f64.powf(d2 / tau) - u2.cycles_per_bit * u2.energy_per_cycle,
        ];
        let h1 = 1e-5 * d1;
        let h2 = 1e-5 * d2;
        let numeric = [
            (v(d1 + h1, d2) - v(d1 - h1, d2)) / (2.0 * h1),
            (v(d1, d2 + h2) - v(d1, d2 - h2)) / (2.0 * h2),
        ];
        for j in 0..2 {
            // Relative to the size of the terms, since the two can cancel.
            let scale = sum.abs() + u1.cycles_per_bit * u1.energy_per_cycle + u2.cycles_per_bit * u2.energy_per_cycle;
            prop_assert!((analytic[j] - numeric[j]).abs() <= 1e-6 * scale, "{j}: {} vs {}", analytic[j], numeric[j]);
        }
    }

    #[test]
    fn joint_convexity(inst in instance(3), seed in any::<u64>(), lambda in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_feasible(&inst, &mut rng);
        let y = random_feasible(&inst, &mut rng);
        let mid = Allocation::new(
            x.t.iter().zip(&y.t).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
            x.d.iter().zip(&y.d).map(|(a, b)| [lambda * a[0] + (1.0 - lambda) * b[0], lambda * a[1] + (1.0 - lambda) * b[1]]).collect(),
        );
        let (Ok(fx), Ok(fy)) = (total_objective(&inst, &x), total_objective(&inst, &y)) else {
            return Ok(()); // one of the points needs more power than a double holds
        };
        let fm = total_objective(&inst, &mid).unwrap();
        prop_assert!(fm <= lambda * fx + (1.0 - lambda) * fy + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn time_step_is_optimal(inst in instance(4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_feasible(&inst, &mut rng).d;
        let time = solve_time(&inst, &d).unwrap();
        let best = total_objective(&inst, &Allocation::new(time.t.clone(), d.clone())).unwrap();
        let total: f64 = time.t.iter().sum();
        prop_assert!(rel(total, inst.deadline()) <= 1e-9);

        let delta = 1e-6 * inst.deadline();
        for i in 0..time.t.len() {
            for j in 0..time.t.len() {
                if i == j || time.t[j] <= delta {
                    continue;
                }
                for s in [1.0, -1.0] {
                    let mut t = time.t.clone();
                    t[i] += s * delta;
                    t[j] -= s * delta;
                    if t[i] <= 0.0 || t[j] <= 0.0 {
                        continue;
                    }
                    if let Ok(v) = total_objective(&inst, &Allocation::new(t, d.clone())) {
                        prop_assert!(v >= best - 1e-10);
                    }
                }
            }
        }
        for _ in 0..100 {
            let other = random_feasible(&inst, &mut rng).t;
            if let Ok(v) = total_objective(&inst, &Allocation::new(other, d.clone())) {
                prop_assert!(best <= v * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn time_demand_falls_with_alpha(inst in instance(4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_feasible(&inst, &mut rng).d;
        let mut last = f64::INFINITY;
        for k in -6..6 {
            let alpha = 10f64.powi(k);
            let demand = time_demand(&inst, &d, alpha).unwrap();
            prop_assert!(demand < last);
            last = demand;
        }
    }

    #[test]
    fn data_step_is_optimal_and_exact(inst in instance(4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_feasible(&inst, &mut rng).t;
        let data = solve_data(&inst, &t).unwrap();
        let boxes = inst.offload_boxes();
        for (d, b) in data.d.iter().zip(&boxes) {
            for j in 0..2 {
                prop_assert!(d[j] >= b.lower[j] && d[j] <= b.upper[j]);
            }
        }
        prop_assert!(inst.cloud_cycles(&data.d) <= inst.cloud_capacity() * (1.0 + 1e-12));

        // Stationarity of interior coordinates at the returned price.
        for (i, g) in inst.groups().iter().enumerate() {
            let tau = B * t[i];
            let [d1, d2] = data.d[i];
            let sum = LN_2 * g.a1() * 2f64.powf((d1 + d2) / tau);
            let grads = [sum, sum + LN_2 * (g.a2() - g.a1()) * 2f64.powf(d2 / tau)];
            for (j, u) in g.users().into_iter().enumerate() {
                let d = data.d[i][j];
                if d > boxes[i].lower[j] && d < boxes[i].upper[j] {
                    let price = (u.energy_per_cycle - data.beta) * u.cycles_per_bit;
                    let scale = grads[j] + (u.energy_per_cycle + data.beta) * u.cycles_per_bit;
                    prop_assert!((grads[j] - price).abs() <= 1e-6 * scale);
                }
            }
        }

        let best = total_objective(&inst, &Allocation::new(t.clone(), data.d.clone())).unwrap();
        for _ in 0..100 {
            let other = random_feasible(&inst, &mut rng).d;
            if let Ok(v) = total_objective(&inst, &Allocation::new(t.clone(), other)) {
                prop_assert!(best <= v * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn cloud_load_falls_with_price(inst in instance(4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_feasible(&inst, &mut rng).t;
        let mut last = f64::INFINITY;
        for k in 0..=60 {
            let beta = 2.5e-10 * k as f64 / 60.0;
            let load = cloud_load(&inst, &t, beta);
            prop_assert!(load <= last * (1.0 + 1e-12));
            last = load;
        }
    }

    #[test]
    fn solver_descends_and_certifies(inst in instance(4)) {
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        for w in sol.trace.half_step_objectives.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(sol.trace.kkt_residual <= 1e-6);
        prop_assert!(sol.allocation.is_feasible(&inst, 1e-9));
        if sol.allocation.d.iter().any(|d| d[0] + d[1] > 0.0) {
            prop_assert!(rel(sol.allocation.total_time(), inst.deadline()) <= 1e-9);
        }
    }

    #[test]
    fn solver_output_is_a_fixed_point(inst in instance(4)) {
        let opts = SolverOptions::default();
        let sol = solve(&inst, &opts).unwrap();
        let again = solve_from(&inst, sol.allocation.clone(), &SolverOptions::uncertified(opts.tolerance, 1)).unwrap();
        prop_assert!((again.objective() - sol.objective()).abs() < opts.tolerance * sol.objective());
    }

    #[test]
    fn solver_beats_baselines(inst in instance(4)) {
        let opts = SolverOptions::default();
        let proposed = solve(&inst, &opts).unwrap().objective();
        let equal = equal_resource_solve(&inst).unwrap().1.total;
        let oma = oma_solve(&inst, &opts).unwrap().objective();
        prop_assert!(proposed <= equal * (1.0 + 1e-12), "{proposed} vs equal {equal}");
        prop_assert!(proposed <= oma * (1.0 + 1e-12), "{proposed} vs oma {oma}");
    }

    #[test]
    fn generated_cells_keep_strong_users_first(seed in any::<u64>()) {
        let spec = ScenarioSpec::default().with_seed(seed);
        let inst = generate(&spec).unwrap();
        for g in inst.groups() {
            prop_assert!(g.user1().channel_gain >= g.user2().channel_gain);
        }
        prop_assert_eq!(instance_to_json(&inst), instance_to_json(&generate(&spec).unwrap()));
    }
}

#[test]
fn generated_cells_are_structurally_valid() {
    // Capacity feasibility is a property of the draw, not of the generator:
    // at the default capacity about half of all cells need more mandatory
    // cloud cycles than exist. Everything else must always check out.
    let mut infeasible = 0;
    let mut bits = 0.0;
    for seed in 0..1000 {
        let inst = generate(&ScenarioSpec::default().with_seed(seed)).unwrap();
        bits += inst.groups().iter().flat_map(|g| g.users()).map(|u| u.data_bits).sum::<f64>();
        if let Err(e) = inst.validate() {
            assert!(e.is_infeasible() && e.diagnostics.len() == 1, "seed {seed}: {e}");
            infeasible += 1;
        }
    }
    let mean = bits / 30_000.0;
    assert!((mean / 3e5 - 1.0).abs() <= 0.02, "mean data size {mean}");
    assert!(infeasible < 1000);
}

#[test]
fn tiny_cells_solve() {
    for seed in 0..20 {
        let inst = cell(2, seed, 0.5);
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert!(sol.trace.iterations() <= 2, "seed {seed}: {}", sol.trace.iterations());
    }
}
