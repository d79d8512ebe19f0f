//! Optimal cost design for gradient-based model predictive control.
//!
//! A receding-horizon planner ([`planner`]) drives a kinematic car
//! ([`dynamics`]) on a three-lane highway, minimizing a linear cost over seven
//! smooth features ([`costs`]) while tracking a belief over what the other
//! driver will do ([`human`]). Because the planner is myopic, gets stuck in
//! local optima, ignores its own future replanning and may plan with the
//! wrong dynamics, handing it the true task cost does not yield the cheapest
//! executed trajectory. [`costdesign`] searches for surrogate weights whose
//! *rollouts* are cheapest under the true cost. [`scenarios`] builds the three
//! highway tasks and [`harness`] runs the experiments and the CLI.

pub mod cma;
pub mod costdesign;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod human;
pub mod planner;
pub mod rng;
pub mod scenarios;

pub use costs::{normalize_weights, CostWeights, RoadGeometry, WeightsLabel};
pub use dynamics::{CarState, Control, DynamicsConfig, WindParams, WorldState};
pub use error::{Error, Result};
pub use human::{Belief, HumanHypothesis};
pub use planner::{mpc_rollout, ControlSequence, PlannerConfig, Rollout};
pub use scenarios::{build_scenario, Scenario};
