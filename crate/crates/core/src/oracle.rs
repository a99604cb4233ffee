//! Brute-force reference optimum for instances with at most three groups.
//!
//! Time shares range over the compositions of `steps` into `N` parts and
//! each offload over `steps + 1` points of its box. For every group and time
//! share the grid is evaluated once; a composition then picks one grid point
//! per group. When the unconstrained per-group minima overload the cloud,
//! the exact grid optimum is found by walking the per-group Pareto fronts of
//! (cloud load, energy). The best grid point is then polished by a pattern
//! search.
//!
//! Energies here are evaluated with an independent `powf` formula rather than
//! the solver's kernel, so agreement between the two is a genuine check.

use rayon::prelude::*;

use crate::energy::total_objective;
use crate::instance::{Allocation, InvalidInstance, NomaGroup, ProblemInstance};

pub const MAX_GROUPS: usize = 3;
pub const MIN_STEPS: usize = 8;
const PRICE_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle refuses {0} groups (at most {MAX_GROUPS})")]
    TooManyGroups(usize),
    #[error("oracle needs at least {MIN_STEPS} steps per dimension, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
    #[error("no feasible grid point")]
    NoFeasiblePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Kernel energy of `best_point`.
    pub best_objective: f64,
    /// Independent energy of `best_point`.
    pub independent_objective: f64,
    pub best_point: Allocation,
    /// Best energy on the grid itself, before polishing.
    pub grid_objective: f64,
    /// Step counts per dimension: `N` time shares then `2N` offloads.
    pub grid_resolution: Vec<usize>,
    /// Estimated worst-case gap between the grid optimum and the true one.
    pub resolution_bound: f64,
}

/// `B t (a1 (2^{(d1+d2)/Bt} − 1) + (a2 − a1)(2^{d2/Bt} − 1)) + Σ (R − d) C P`.
fn group_energy(g: &NomaGroup, bandwidth: f64, t: f64, d: [f64; 2]) -> f64 {
    let local: f64 = g
        .users()
        .iter()
        .zip(d)
        .map(|(u, dj)| (u.data_bits - dj) * u.cycles_per_bit * u.energy_per_cycle)
        .sum();
    if t <= 0.0 {
        return if d[0] + d[1] > 0.0 { f64::INFINITY } else { local };
    }
    let bt = bandwidth * t;
    let offload = bt
        * (g.a1() * (2f64.powf((d[0] + d[1]) / bt) - 1.0) + (g.a2() - g.a1()) * (2f64.powf(d[1] / bt) - 1.0));
    if offload.is_finite() {
        offload + local
    } else {
        f64::INFINITY
    }
}

fn independent_energy(instance: &ProblemInstance, alloc: &Allocation) -> f64 {
    instance
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| group_energy(g, instance.bandwidth(), alloc.t[i], alloc.d[i]))
        .sum()
}

fn load_of(g: &NomaGroup, d: [f64; 2]) -> f64 {
    d[0] * g.user1().cycles_per_bit + d[1] * g.user2().cycles_per_bit
}

fn axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if lo >= hi {
        return vec![lo];
    }
    (0..=steps)
        .map(|k| if k == steps { hi } else { lo + (hi - lo) * k as f64 / steps as f64 })
        .collect()
}

#[derive(Clone, Copy)]
struct Cell {
    load: f64,
    energy: f64,
    d: [f64; 2],
}

/// All grid points of one group at one time share, reduced to the
/// unconstrained minimum and the Pareto front sorted by increasing load.
struct Table {
    best: Option<Cell>,
    front: Vec<Cell>,
    /// `min (energy + λ_q·load)` over the cells, for each price `λ_q`.
    priced: Vec<f64>,
}

fn table(instance: &ProblemInstance, i: usize, t: f64, steps: usize, prices: &[f64]) -> Table {
    let g = &instance.groups()[i];
    let bx = instance.offload_box(i);
    let mut cells: Vec<Cell> = if t == 0.0 {
        vec![Cell {
            load: 0.0,
            energy: group_energy(g, instance.bandwidth(), 0.0, [0.0, 0.0]),
            d: [0.0, 0.0],
        }]
    } else {
        let xs = axis(bx.lower[0], bx.upper[0], steps);
        let ys = axis(bx.lower[1], bx.upper[1], steps);
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| [x, y]))
            .map(|d| Cell {
                load: load_of(g, d),
                energy: group_energy(g, instance.bandwidth(), t, d),
                d,
            })
            .filter(|c| c.energy.is_finite())
            .collect()
    };
    let best = cells.iter().copied().min_by(|a, b| a.energy.total_cmp(&b.energy));
    cells.sort_by(|a, b| a.load.total_cmp(&b.load).then(a.energy.total_cmp(&b.energy)));
    let mut front: Vec<Cell> = Vec::new();
    for c in cells {
        if front.last().is_none_or(|last| c.energy < last.energy) {
            front.push(c);
        }
    }
    let priced = prices
        .iter()
        .map(|&p| front.iter().map(|c| c.energy + p * c.load).fold(f64::INFINITY, f64::min))
        .collect();
    Table { best, front, priced }
}

/// Cheapest choice of one cell per front with total load ≤ `budget`.
fn cheapest(fronts: &[&[Cell]], budget: f64) -> Option<(f64, Vec<Cell>)> {
    match fronts {
        [] => Some((0.0, Vec::new())),
        [only] => {
            // Fronts have decreasing energy in load: take the last that fits.
            let k = only.partition_point(|c| c.load <= budget);
            (k > 0).then(|| (only[k - 1].energy, vec![only[k - 1]]))
        }
        [a, b] => {
            // Two pointers: as a's load grows, b's allowance shrinks.
            let mut best: Option<(f64, Vec<Cell>)> = None;
            let mut j = b.partition_point(|c| c.load <= budget);
            for ca in a.iter() {
                while j > 0 && ca.load + b[j - 1].load > budget {
                    j -= 1;
                }
                if j == 0 {
                    break;
                }
                let e = ca.energy + b[j - 1].energy;
                if best.as_ref().is_none_or(|(be, _)| e < *be) {
                    best = Some((e, vec![*ca, b[j - 1]]));
                }
            }
            best
        }
        [first, rest @ ..] => {
            // The last cell of a front is its cheapest.
            let rest_floor: f64 = rest.iter().filter_map(|f| f.last()).map(|c| c.energy).sum();
            let mut best: Option<(f64, Vec<Cell>)> = None;
            for c in first.iter() {
                if best.as_ref().is_some_and(|(be, _)| c.energy + rest_floor >= *be) {
                    continue;
                }
                if let Some((e, mut cells)) = cheapest(rest, budget - c.load) {
                    let e = e + c.energy;
                    if best.as_ref().is_none_or(|(be, _)| e < *be) {
                        cells.insert(0, *c);
                        best = Some((e, cells));
                    }
                }
            }
            best
        }
    }
}

fn compositions(total: usize, parts: usize, allow_zero: &[bool]) -> Vec<Vec<usize>> {
    fn go(total: usize, idx: usize, allow_zero: &[bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == allow_zero.len() {
            if total > 0 || allow_zero[idx] {
                cur.push(total);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        let start = if allow_zero[idx] { 0 } else { 1 };
        for k in start..=total {
            cur.push(k);
            go(total - k, idx + 1, allow_zero, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, 0, allow_zero, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Exhaustive grid search plus polish. Refuses more than three groups.
pub fn grid_oracle(instance: &ProblemInstance, steps_per_dim: usize) -> Result<OracleResult, OracleError> {
    let n = instance.num_groups();
    if n > MAX_GROUPS {
        return Err(OracleError::TooManyGroups(n));
    }
    if steps_per_dim < MIN_STEPS {
        return Err(OracleError::TooFewSteps(steps_per_dim));
    }
    instance.validate()?;
    let deadline = instance.deadline();
    let capacity = instance.cloud_capacity();
    let boxes = instance.offload_boxes();
    let allow_zero: Vec<bool> = boxes.iter().map(|b| b.lower == [0.0, 0.0]).collect();

    // Cloud prices for Lagrangian lower bounds, up to the largest local
    // energy per cycle (beyond it nobody offloads optional bits).
    let max_price = instance
        .groups()
        .iter()
        .flat_map(|g| g.users())
        .map(|u| u.energy_per_cycle)
        .fold(0.0, f64::max);
    let prices: Vec<f64> = (0..=PRICE_STEPS).map(|q| max_price * q as f64 / PRICE_STEPS as f64).collect();
    let tables: Vec<Vec<Table>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..=steps_per_dim)
                .map(|k| table(instance, i, deadline * k as f64 / steps_per_dim as f64, steps_per_dim, &prices))
                .collect()
        })
        .collect();

    // Lagrangian bounds `Σ min(E + λ·load) − λF` (λ = 0 is the sum of the
    // unconstrained minima) bound each composition from below; visit
    // compositions in bound order and stop once the bound reaches the best
    // exact value found.
    let mut candidates: Vec<(f64, Vec<usize>)> = compositions(steps_per_dim, n, &allow_zero)
        .into_par_iter()
        .filter_map(|ks| {
            tables.iter().zip(&ks).all(|(t, &k)| t[k].best.is_some()).then_some(())?;
            let lb = prices
                .iter()
                .enumerate()
                .map(|(q, p)| ks.iter().enumerate().map(|(i, &k)| tables[i][k].priced[q]).sum::<f64>() - p * capacity)
                .fold(f64::NEG_INFINITY, f64::max);
            Some((lb, ks))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let exact = |ks: &[usize]| -> Option<(f64, Vec<Cell>)> {
        let picked: Vec<&Table> = ks.iter().enumerate().map(|(i, &k)| &tables[i][k]).collect();
        let free: Vec<Cell> = picked.iter().map(|t| t.best).collect::<Option<_>>()?;
        if free.iter().map(|c| c.load).sum::<f64>() <= capacity {
            Some((free.iter().map(|c| c.energy).sum(), free))
        } else {
            let fronts: Vec<&[Cell]> = picked.iter().map(|t| t.front.as_slice()).collect();
            cheapest(&fronts, capacity)
        }
    };
    let chunk = rayon::current_num_threads().max(1) * 4;
    let mut best: Option<(f64, Vec<usize>, Vec<Cell>)> = None;
    for batch in candidates.chunks(chunk) {
        if best.as_ref().is_some_and(|b| batch[0].0 >= b.0) {
            break;
        }
        let found: Vec<Option<(f64, Vec<Cell>)>> = batch.par_iter().map(|(_, ks)| exact(ks)).collect();
        for ((_, ks), f) in batch.iter().zip(found) {
            if let Some((e, cells)) = f {
                if best.as_ref().is_none_or(|b| e < b.0 || (e == b.0 && *ks < b.1)) {
                    best = Some((e, ks.clone(), cells));
                }
            }
        }
    }
    let best = best.ok_or(OracleError::NoFeasiblePoint)?;

    let (grid_objective, ks, cells) = best;
    let grid_point = Allocation::new(
        ks.iter().map(|&k| deadline * k as f64 / steps_per_dim as f64).collect(),
        cells.iter().map(|c| c.d).collect(),
    );
    let spacing = Spacing::new(instance, steps_per_dim);
    let resolution_bound = resolution_bound(instance, &grid_point, &spacing);
    let best_point = polish(instance, grid_point, &spacing);
    let independent_objective = independent_energy(instance, &best_point);
    let best_objective = total_objective(instance, &best_point).unwrap_or(independent_objective);

    let mut grid_resolution = vec![steps_per_dim; n];
    grid_resolution.extend(boxes.iter().flat_map(|b| (0..2).map(move |j| if b.lower[j] < b.upper[j] { steps_per_dim } else { 0 })));
    Ok(OracleResult {
        best_objective,
        independent_objective,
        best_point,
        grid_objective,
        grid_resolution,
        resolution_bound,
    })
}

/// Grid spacing per coordinate.
struct Spacing {
    t: f64,
    d: Vec<[f64; 2]>,
}

impl Spacing {
    fn new(instance: &ProblemInstance, steps: usize) -> Self {
        Self {
            t: instance.deadline() / steps as f64,
            d: instance
                .offload_boxes()
                .iter()
                .map(|b| [(b.upper[0] - b.lower[0]) / steps as f64, (b.upper[1] - b.lower[1]) / steps as f64])
                .collect(),
        }
    }
}

/// `Σ_k |∂V/∂x_k|·h_k + ½·|∂²V/∂x_k²|·h_k²` at the grid optimum, with
/// derivatives from finite differences of step `h_k/4` (one-sided at
/// bounds). The true optimum lies within one cell of a grid point in every
/// coordinate, so this estimates how much the grid can miss.
fn resolution_bound(instance: &ProblemInstance, x: &Allocation, h: &Spacing) -> f64 {
    let n = instance.num_groups();
    let boxes = instance.offload_boxes();
    let bw = instance.bandwidth();
    let mut bound = 0.0;
    for (i, g) in instance.groups().iter().enumerate() {
        let f = |t: f64, d: [f64; 2]| group_energy(g, bw, t, d);
        let t = x.t[i];
        let d = x.d[i];
        // Time coordinate, as far as the group is transmitting.
        if t > 0.0 && n > 0 {
            bound += curvature_term(|s| f(s, d), t, h.t, 0.0, instance.deadline());
        }
        for j in 0..2 {
            let (lo, hi) = (boxes[i].lower[j], boxes[i].upper[j]);
            if hi > lo {
                let along = |v: f64| {
                    let mut dd = d;
                    dd[j] = v;
                    f(t, dd)
                };
                bound += curvature_term(along, d[j], h.d[i][j], lo, hi);
            }
        }
    }
    bound
}

fn curvature_term(f: impl Fn(f64) -> f64, x: f64, h: f64, lo: f64, hi: f64) -> f64 {
    let e = h / 4.0;
    let (a, b) = ((x - e).max(lo), (x + e).min(hi));
    if b <= a {
        return 0.0;
    }
    let (fa, fx, fb) = (f(a), f(x), f(b));
    if !(fa.is_finite() && fx.is_finite() && fb.is_finite()) {
        return 0.0;
    }
    let slope = (fb - fa) / (b - a);
    let curv = if a < x && x < b {
        2.0 * ((fb - fx) / (b - x) - (fx - fa) / (x - a)) / (b - a)
    } else {
        0.0
    };
    slope.abs() * h + 0.5 * curv.abs() * h * h
}

/// Pattern search from `x`: shifts of time between groups, single offload
/// moves, and load-neutral exchanges between two users, with steps halved
/// from one grid cell down to 1e-12 of it.
fn polish(instance: &ProblemInstance, mut x: Allocation, h: &Spacing) -> Allocation {
    let n = instance.num_groups();
    let boxes = instance.offload_boxes();
    let capacity = instance.cloud_capacity();
    let users: Vec<(usize, usize, f64)> = instance
        .groups()
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.users().into_iter().enumerate().map(move |(j, u)| (i, j, u.cycles_per_bit)))
        .filter(|&(i, j, _)| boxes[i].lower[j] < boxes[i].upper[j])
        .collect();
    let feasible = |p: &Allocation| {
        p.t.iter().all(|&t| t >= 0.0)
            && p.d.iter().zip(&boxes).all(|(d, b)| (0..2).all(|j| d[j] >= b.lower[j] && d[j] <= b.upper[j]))
            && instance.cloud_cycles(&p.d) <= capacity
    };
    let mut value = independent_energy(instance, &x);

    let mut scale = 1.0;
    while scale > 1e-12 {
        for _ in 0..200 {
            let mut improved = false;
            let try_move = |candidate: Allocation, x: &mut Allocation, value: &mut f64| {
                if feasible(&candidate) {
                    let v = independent_energy(instance, &candidate);
                    if v < *value {
                        *x = candidate;
                        *value = v;
                        return true;
                    }
                }
                false
            };
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let mut c = x.clone();
                    let dt = (scale * h.t).min(c.t[b]);
                    c.t[a] += dt;
                    c.t[b] -= dt;
                    improved |= try_move(c, &mut x, &mut value);
                }
            }
            for &(i, j, _) in &users {
                for sign in [1.0, -1.0] {
                    let mut c = x.clone();
                    let b = &boxes[i];
                    c.d[i][j] = (c.d[i][j] + sign * scale * h.d[i][j]).clamp(b.lower[j], b.upper[j]);
                    improved |= try_move(c, &mut x, &mut value);
                }
            }
            for (ua, &(ia, ja, ca)) in users.iter().enumerate() {
                for &(ib, jb, cb) in &users[ua + 1..] {
                    for sign in [1.0, -1.0] {
                        let mut c = x.clone();
                        let step = sign * scale * h.d[ia][ja];
                        c.d[ia][ja] += step;
                        c.d[ib][jb] -= step * ca / cb;
                        improved |= try_move(c, &mut x, &mut value);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        scale *= 0.5;
    }
    x
}
