use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use noma_mec::experiment::{run_convergence, run_sweep, ExperimentError, Scheme, SweepSpec, SweepVariable};
use noma_mec::oracle::grid_oracle;
use noma_mec::scenario::{generate, instance_to_json, load, load_scenario, ScenarioSpec};
use noma_mec::solver::{sci, solve, SolveError, SolverOptions};

/// Energy-minimal NOMA offloading: convergence traces, sweeps, single solves.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario parameters as JSON; missing fields take defaults.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed, overriding the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative energy change that ends the iteration.
    #[arg(long, default_value_t = 1e-4)]
    xi: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One convergence trace per cloud capacity.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [4e9, 6e9, 8e9])]
        f_values: Vec<f64>,
    },
    /// Mean energy per scheme along the deadline or the cloud capacity.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// deadline_T or cloud_F.
        #[arg(long, value_parser = parse_variable)]
        variable: SweepVariable,
        /// Sweep values; defaults to 0.05..0.15 s or 2e9..1e10 cycles.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 100)]
        n_instances: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme, default_value = "proposed,equal,oma")]
        schemes: Vec<Scheme>,
        /// Skip draws infeasible at some sweep point instead of failing.
        #[arg(long)]
        skip_infeasible: bool,
    },
    /// Solve one instance file; prints a summary, writes the trace CSV.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force reference optimum for an instance with at most 3 groups.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an instance and write it as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    match s {
        "deadline_T" => Ok(SweepVariable::DeadlineT),
        "cloud_F" => Ok(SweepVariable::CloudF),
        _ => Err("expected deadline_T or cloud_F".into()),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| "expected proposed, equal or oma".into())
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Infeasible(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e.infeasible_seed() {
            // The message leads with the seed.
            Some(_) => Failure::Infeasible(format!("{:#}", anyhow::Error::from(e))),
            None => Failure::Config(e.into()),
        }
    }
}

impl Common {
    fn scenario(&self) -> anyhow::Result<ScenarioSpec> {
        let mut spec = match &self.scenario {
            Some(path) => load_scenario(path)?,
            None => ScenarioSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        Ok(spec)
    }

    fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.xi,
            max_iterations: self.max_iter,
            ..SolverOptions::default()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve_error(path: &Path, e: SolveError) -> Failure {
    if e.is_infeasible() {
        Failure::Infeasible(format!("{}: {e}", path.display()))
    } else {
        Failure::Config(anyhow::Error::new(e).context(path.display().to_string()))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Converge { common, f_values } => {
            let result = run_convergence(&common.scenario()?, &f_values, &common.options())?;
            emit(common.out.as_deref(), &result.to_csv())?;
        }
        Command::Sweep {
            common,
            variable,
            values,
            n_instances,
            schemes,
            skip_infeasible,
        } => {
            let scenario = common.scenario()?;
            let values = values.unwrap_or_else(|| match variable {
                SweepVariable::DeadlineT => vec![0.05, 0.075, 0.1, 0.125, 0.15],
                SweepVariable::CloudF => vec![2e9, 4e9, 6e9, 8e9, 1e10],
            });
            let spec = SweepSpec {
                variable,
                values,
                n_instances,
                seed: scenario.seed,
                schemes,
                skip_infeasible,
            };
            let result = run_sweep(&scenario, &spec, &common.options())?;
            if result.skipped > 0 {
                eprintln!("skipped {} infeasible draws", result.skipped);
            }
            emit(common.out.as_deref(), &result.to_csv())?;
        }
        Command::Solve { instance, common } => {
            let inst = load(&instance).map_err(anyhow::Error::from)?;
            let solution = solve(&inst, &common.options()).map_err(|e| solve_error(&instance, e))?;
            let t = &solution.trace;
            eprintln!(
                "energy {} J, {} iterations ({:?}), {} certification sweeps, kkt residual {}, alpha {}, beta {}",
                sci(solution.objective()),
                t.iterations(),
                t.termination,
                t.certify_sweeps,
                sci(t.kkt_residual),
                sci(solution.alpha),
                sci(solution.beta)
            );
            emit(common.out.as_deref(), &t.to_csv())?;
        }
        Command::Oracle { instance, steps, out } => {
            let inst = load(&instance).map_err(anyhow::Error::from)?;
            let r = grid_oracle(&inst, steps).map_err(|e| {
                if matches!(&e, noma_mec::oracle::OracleError::Invalid(i) if i.is_infeasible()) {
                    Failure::Infeasible(format!("{}: {e}", instance.display()))
                } else {
                    Failure::Config(e.into())
                }
            })?;
            let mut text = format!(
                "best_objective,{}\ngrid_objective,{}\nresolution_bound,{}\n",
                sci(r.best_objective),
                sci(r.grid_objective),
                sci(r.resolution_bound)
            );
            for (i, (t, d)) in r.best_point.t.iter().zip(&r.best_point.d).enumerate() {
                text.push_str(&format!("group_{i},{},{},{}\n", sci(*t), sci(d[0]), sci(d[1])));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Generate { common } => {
            let inst = generate(&common.scenario()?).map_err(anyhow::Error::from)?;
            emit(common.out.as_deref(), &instance_to_json(&inst))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(3)
        }
    }
}
