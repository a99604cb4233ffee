//! Energy-minimal time and offloading allocation for uplink NOMA
//! mobile-edge computing.
//!
//! `N` groups of two users share a frame of length `T`; inside its time
//! share a group transmits with superposition coding and successive
//! interference cancellation at the base station. Each user offloads part of
//! its task to a cloud of capacity `F` cycles and computes the rest locally.
//! [`solver::solve`] finds the time shares and offloads that minimise total
//! transmit plus local computing energy.
//!
//! ```
//! use noma_mec::scenario::{generate, ScenarioSpec};
//! use noma_mec::solver::{solve, SolverOptions};
//!
//! let spec = ScenarioSpec { n_users: 4, cloud_capacity_cycles: 2e9, ..ScenarioSpec::default() };
//! let instance = generate(&spec).unwrap();
//! let solution = solve(&instance, &SolverOptions::default()).unwrap();
//! assert!(solution.trace.kkt_residual <= 1e-6);
//! assert!(solution.objective() <= instance.all_local_energy());
//! ```

pub mod baselines;
pub mod data_alloc;
pub mod energy;
pub mod experiment;
pub mod instance;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod time_alloc;

pub use instance::{Allocation, NomaGroup, ProblemInstance, UserProfile};
pub use solver::{solve, Solution, SolverOptions};
