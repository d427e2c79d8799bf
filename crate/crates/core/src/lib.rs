//! Power allocation for massive-MIMO cloud-RAN downlinks with
//! capacity-limited fronthaul: sum-rate and energy-efficiency maximization
//! by successive convex approximation, a Monte Carlo drop generator and
//! independent verification oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod ee;
pub mod error;
pub mod experiments;
pub mod radio;
pub mod scenario;
pub mod subproblem;
pub mod verify;
pub mod wsr;

pub use bounds::BoundContext;
pub use config::{FlatConfig, NetworkConfig, PowerParams};
pub use ee::{dinkelbach_update, ee_power_update, solve_ee, DinkelbachState};
pub use error::{ConfigError, ModelError, SolveError};
pub use experiments::{baseline_equal_power, emit_plot_data, run_sweep, Figure, ResultRow, Scheme, SweepSpec};
pub use radio::{FronthaulConstraint, PowerModel, PowerVector, Precoder, RadioModel};
pub use scenario::{generate_drop, AssociationRule, Scenario};
pub use wsr::{solve_wsr, DualState, SolveReport, SolverConfig};
