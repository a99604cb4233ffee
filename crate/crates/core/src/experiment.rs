//! Convergence traces and energy sweeps over the deadline or the cloud
//! capacity, for the proposed scheme and the baselines.
//!
//! Sweep instance `k` is drawn with seed `seed + k` (or the next seeds that
//! are feasible at every sweep point, when infeasible draws are skipped) and
//! shared by all schemes and all sweep values.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{equal_resource_solve, oma_solve};
use crate::instance::ProblemInstance;
use crate::scenario::{fingerprint, generate, ScenarioError, ScenarioSpec};
use crate::solver::{sci, solve, SolveError, SolveTrace, SolverOptions};

/// Draws tried per wanted instance before giving up on skipping.
const SKIP_BUDGET: u64 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("seed {seed}, {variable} = {value}")]
    Solve {
        seed: u64,
        variable: SweepVariable,
        value: f64,
        #[source]
        source: SolveError,
    },
    #[error("seed {seed}")]
    Convergence {
        seed: u64,
        #[source]
        source: SolveError,
    },
    #[error("found only {found} of {wanted} instances feasible at every sweep point")]
    NotEnoughFeasible { found: usize, wanted: usize },
    #[error("schemes saw different instances for seed {seed}")]
    Unpaired { seed: u64 },
}

impl ExperimentError {
    /// The seed of the instance that turned out infeasible, if that is what
    /// went wrong.
    pub fn infeasible_seed(&self) -> Option<u64> {
        match self {
            ExperimentError::Solve { seed, source, .. } | ExperimentError::Convergence { seed, source }
                if source.is_infeasible() =>
            {
                Some(*seed)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "deadline_T")]
    DeadlineT,
    #[serde(rename = "cloud_F")]
    CloudF,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::DeadlineT => "deadline_T",
            SweepVariable::CloudF => "cloud_F",
        }
    }

    pub fn apply(self, instance: &ProblemInstance, value: f64) -> ProblemInstance {
        match self {
            SweepVariable::DeadlineT => instance.with_deadline(value),
            SweepVariable::CloudF => instance.with_cloud_capacity(value),
        }
    }
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Equal,
    Oma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Equal, Scheme::Oma];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Equal => "equal",
            Scheme::Oma => "oma",
        }
    }

    /// Optimal energy of `instance` under this scheme.
    pub fn energy(self, instance: &ProblemInstance, options: &SolverOptions) -> Result<f64, SolveError> {
        Ok(match self {
            Scheme::Proposed => solve(instance, options)?.objective(),
            Scheme::Equal => equal_resource_solve(instance)?.1.total,
            Scheme::Oma => oma_solve(instance, options)?.objective(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub n_instances: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Skip draws that are infeasible at some sweep point instead of
    /// failing on them.
    #[serde(default)]
    pub skip_infeasible: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSweep(m.into()));
        if self.values.is_empty() {
            return bad("no sweep values");
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("sweep values must be finite and non-negative");
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sweep values must be strictly increasing");
        }
        if self.n_instances == 0 {
            return bad("n_instances must be at least 1");
        }
        if self.schemes.is_empty() {
            return bad("no schemes");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub scheme: Scheme,
    pub mean_energy_j: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Seeds of the instances used, in order.
    pub seeds: Vec<u64>,
    /// Draws skipped as infeasible.
    pub skipped: usize,
    /// `energies[k][v][s]`: instance `k`, sweep value `v`, scheme `s`.
    pub energies: Vec<Vec<Vec<f64>>>,
}

impl SweepResult {
    /// CSV with columns `variable,value,scheme,mean_energy_j,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,value,scheme,mean_energy_j,n\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.variable,
                sci(r.value),
                r.scheme.name(),
                sci(r.mean_energy_j),
                r.n
            );
        }
        out
    }

    /// Mean energy of `scheme` at each sweep value.
    pub fn means(&self, scheme: Scheme) -> Vec<f64> {
        self.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.mean_energy_j).collect()
    }
}

fn feasible_everywhere(base: &ProblemInstance, spec: &SweepSpec) -> bool {
    spec.values.iter().all(|&v| spec.variable.apply(base, v).validate().is_ok())
}

/// Picks the instance seeds: `seed, seed + 1, …`, skipping draws that are
/// infeasible at any sweep point when asked to.
fn pick_seeds(scenario: &ScenarioSpec, spec: &SweepSpec) -> Result<(Vec<u64>, usize), ExperimentError> {
    if !spec.skip_infeasible {
        return Ok(((0..spec.n_instances as u64).map(|k| spec.seed + k).collect(), 0));
    }
    let mut seeds = Vec::with_capacity(spec.n_instances);
    let mut skipped = 0;
    let budget = SKIP_BUDGET * spec.n_instances as u64;
    for k in 0..budget {
        let seed = spec.seed + k;
        if feasible_everywhere(&generate(&scenario.with_seed(seed))?, spec) {
            seeds.push(seed);
            if seeds.len() == spec.n_instances {
                return Ok((seeds, skipped));
            }
        } else {
            skipped += 1;
        }
    }
    Err(ExperimentError::NotEnoughFeasible {
        found: seeds.len(),
        wanted: spec.n_instances,
    })
}

/// Mean energy per (sweep value, scheme) over paired instances. Work runs
/// in parallel; rows and means come out in a fixed order.
pub fn run_sweep(
    scenario: &ScenarioSpec,
    spec: &SweepSpec,
    options: &SolverOptions,
) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    scenario.validate()?;
    let (seeds, skipped) = pick_seeds(scenario, spec)?;

    let jobs: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|k| (0..spec.values.len()).map(move |v| (k, v))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(k, v)| {
            let seed = seeds[k];
            let value = spec.values[v];
            let base = generate(&scenario.with_seed(seed))?;
            let instance = spec.variable.apply(&base, value);
            let hash = fingerprint(&instance);
            spec.schemes
                .iter()
                .map(|&scheme| {
                    // Every scheme must see the very same instance.
                    let own = spec.variable.apply(&generate(&scenario.with_seed(seed))?, value);
                    if fingerprint(&own) != hash {
                        return Err(ExperimentError::Unpaired { seed });
                    }
                    scheme.energy(&own, options).map_err(|source| ExperimentError::Solve {
                        seed,
                        variable: spec.variable,
                        value,
                        source,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let n_values = spec.values.len();
    let energies: Vec<Vec<Vec<f64>>> = results.chunks(n_values).map(|c| c.to_vec()).collect();
    let mut rows = Vec::new();
    for (v, &value) in spec.values.iter().enumerate() {
        for (s, &scheme) in spec.schemes.iter().enumerate() {
            let sum: f64 = energies.iter().map(|e| e[v][s]).sum();
            rows.push(SweepRow {
                variable: spec.variable,
                value,
                scheme,
                mean_energy_j: sum / energies.len() as f64,
                n: energies.len(),
            });
        }
    }
    Ok(SweepResult {
        rows,
        seeds,
        skipped,
        energies,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub cloud_capacities: Vec<f64>,
    pub traces: Vec<SolveTrace>,
}

impl ConvergenceResult {
    /// CSV with columns `F,iteration,objective_joules`; iteration 0 is the
    /// start point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("F,iteration,objective_joules\n");
        for (f, trace) in self.cloud_capacities.iter().zip(&self.traces) {
            for (k, v) in trace.objective_per_iteration.iter().enumerate() {
                let _ = writeln!(out, "{},{k},{}", sci(*f), sci(*v));
            }
        }
        out
    }
}

/// Solves the scenario's instance once per cloud capacity and keeps the
/// traces.
pub fn run_convergence(
    scenario: &ScenarioSpec,
    cloud_capacities: &[f64],
    options: &SolverOptions,
) -> Result<ConvergenceResult, ExperimentError> {
    let base = generate(scenario)?;
    let traces = cloud_capacities
        .par_iter()
        .map(|&f| {
            solve(&base.with_cloud_capacity(f), options)
                .map(|s| s.trace)
                .map_err(|source| ExperimentError::Convergence {
                    seed: scenario.seed,
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    Ok(ConvergenceResult {
        cloud_capacities: cloud_capacities.to_vec(),
        traces,
    })
}
