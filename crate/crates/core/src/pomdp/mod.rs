//! Partially observable extension: observations, beliefs and alpha-vector
//! solvers.

pub mod alpha;
pub mod belief;
pub mod observation;

pub use alpha::{
    alpha_policy_action, expand_beliefs, pbvi_solve, qmdp_alphas, AlphaSet, AlphaVector,
    BeliefSet, PbviConfig, PbviSolution, PbviStats, prune, legal_at_belief,
};
pub use belief::{belief_update, diffuse_bh_belief, initial_belief, map_state, p_minmax, Belief};
pub use observation::{
    build_observation_model, observation_prob, MotorObs, ObservationId, ObservationModel,
    NUM_OBSERVATIONS,
};
