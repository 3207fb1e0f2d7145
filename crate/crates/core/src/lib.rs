//! Contingency management for small uncrewed aircraft as a factored MDP and
//! POMDP: model assembly, solvers, decision policies and a seeded
//! Monte Carlo harness.

pub mod error;
pub mod mdp;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod pomdp;
pub mod sampling;
pub mod sim;

pub use error::{CmaError, Result};
pub use mdp::{value_iteration, SolverConfig, ValueFunction};
pub use metrics::Estimate;
pub use model::{Action, BatteryHealth, Mdp, ModelSpec, StateId};
pub use policy::{Policy, PolicyKind};
pub use pomdp::{
    belief_update, build_observation_model, pbvi_solve, qmdp_alphas, AlphaSet, Belief, BeliefSet,
    ObservationId, ObservationModel, PbviConfig,
};
pub use sim::{run_batch, run_episode, Batch, MetricsSummary, Prior, SimConfig, SimOutcome, Terminal};
