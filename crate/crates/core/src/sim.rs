//! Seeded transition-matrix Monte Carlo episodes and cohort aggregation.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CmaError, Result};
use crate::metrics::Estimate;
use crate::model::{Absorbing, Action, BatteryHealth, FactoredState, Mdp, StateId};
use crate::policy::{Policy, PolicyKind};
use crate::pomdp::{diffuse_bh_belief, initial_belief, Belief, ObservationId, ObservationModel};
use crate::sampling::{sample_categorical, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Completed,
    Terminated,
    Failed,
    HorizonReached,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Prior handed to belief-tracking policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    /// Delta at the cohort's start state.
    #[default]
    KnownBh,
    /// Uniform over the three nominal start states.
    DiffuseBh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub discount: f64,
    pub n_episodes: usize,
    pub base_seed: u64,
    pub p_obs: f64,
    pub bh: BatteryHealth,
    pub policy: PolicyKind,
    #[serde(default)]
    pub prior: Prior,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            discount: 0.99,
            n_episodes: 5000,
            base_seed: 0,
            p_obs: 1.0,
            bh: BatteryHealth::Good,
            policy: PolicyKind::BaselineNoOp,
            prior: Prior::KnownBh,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(CmaError::Domain("horizon must be at least 1".into()));
        }
        if self.n_episodes == 0 {
            return Err(CmaError::Domain("n_episodes must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(CmaError::Domain(format!("discount {} outside [0,1]", self.discount)));
        }
        if !(0.5..=1.0).contains(&self.p_obs) {
            return Err(CmaError::Domain(format!("p_obs {} outside [0.5, 1]", self.p_obs)));
        }
        Ok(())
    }

    pub fn start_state(&self) -> StateId {
        FactoredState::nominal(self.bh).into()
    }

    pub fn prior_belief(&self) -> Belief {
        match self.prior {
            Prior::KnownBh => initial_belief(self.bh),
            Prior::DiffuseBh => diffuse_bh_belief(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub episode: u64,
    pub terminal: Terminal,
    pub took_contingency: bool,
    pub steps: usize,
    pub cum_reward: f64,
    pub disc_reward: f64,
    pub p_minmax: Option<f64>,
}

impl SimOutcome {
    /// Completed without any contingency action.
    pub fn true_success(&self) -> bool {
        self.terminal == Terminal::Completed && !self.took_contingency
    }
}

pub fn sample_transition<R: Rng + ?Sized>(rng: &mut R, s: StateId, a: Action, mdp: &Mdp) -> StateId {
    let next = sample_categorical(rng, mdp.transitions.successors(a.index(), s.index()));
    StateId::new(next).expect("successor within state space")
}

pub fn sample_observation<R: Rng + ?Sized>(
    rng: &mut R,
    next: StateId,
    a: Action,
    obs: &ObservationModel,
) -> ObservationId {
    let o = sample_categorical(rng, obs.support(a.index(), next.index()));
    ObservationId::from_index(o).expect("observation within space")
}

/// One episode on `world`. The policy keeps its own model for belief
/// updates, so `world` may differ from it (for example under a spalling
/// stress override).
///
/// Step rewards use the pre-transition state; an absorbing state's reward
/// is added once on entry and ends the episode.
pub fn run_episode(
    config: &SimConfig,
    world: &Mdp,
    obs: &ObservationModel,
    policy: &Policy,
    episode: u64,
) -> Result<SimOutcome> {
    let mut rng = stream(config.base_seed, episode);
    let mut s = config.start_state();
    let mut ctx = policy.start(s, config.bh, config.prior_belief());
    let mut took_contingency = false;
    let mut cum = 0.0;
    let mut disc = 0.0;
    let mut weight = 1.0;
    for t in 0..config.horizon {
        let a = policy.act(&ctx, s);
        if !world.is_legal(s.index(), a.index()) {
            return Err(CmaError::IllegalAction { state: s.to_string(), action: a.to_string() });
        }
        took_contingency |= a.is_contingency();
        let r = world.rewards.get(s.index(), a.index());
        cum += r;
        disc += weight * r;
        weight *= config.discount;
        let next = sample_transition(&mut rng, s, a, world);
        let o = sample_observation(&mut rng, next, a, obs);
        if let Some(kind) = next.absorbing() {
            let r = world.rewards.get(next.index(), Action::NoOp.index());
            cum += r;
            disc += weight * r;
            let terminal = match kind {
                Absorbing::Complete => Terminal::Completed,
                Absorbing::Terminated => Terminal::Terminated,
                Absorbing::Failure => Terminal::Failed,
                Absorbing::End => {
                    return Err(CmaError::Inconsistent(format!("direct transition from {s} to E")))
                }
            };
            return Ok(SimOutcome {
                episode,
                terminal,
                took_contingency,
                steps: t + 1,
                cum_reward: cum,
                disc_reward: disc,
                p_minmax: ctx.min_max_belief,
            });
        }
        policy.observe(&mut ctx, a, o)?;
        s = next;
    }
    Ok(SimOutcome {
        episode,
        terminal: Terminal::HorizonReached,
        took_contingency,
        steps: config.horizon,
        cum_reward: cum,
        disc_reward: disc,
        p_minmax: ctx.min_max_belief,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub completion_rate: Estimate,
    pub terminated_rate: Estimate,
    pub failure_rate: Estimate,
    pub horizon_rate: Estimate,
    pub safety_rate: Estimate,
    pub true_success_rate: Estimate,
    pub contingency_rate: Estimate,
    pub cum_reward: Estimate,
    pub disc_reward: Estimate,
    pub reward_per_step: Estimate,
    pub steps: Estimate,
    pub p_minmax: Option<Estimate>,
    pub p_minmax_min: Option<f64>,
}

impl MetricsSummary {
    /// Aggregates in episode order, so the result does not depend on the
    /// order outcomes were produced in. `None` for an empty batch.
    pub fn from_outcomes(outcomes: &[SimOutcome]) -> Option<Self> {
        let mut sorted: Vec<&SimOutcome> = outcomes.iter().collect();
        sorted.sort_by_key(|o| o.episode);
        let n = sorted.len();
        let count = |f: &dyn Fn(&SimOutcome) -> bool| sorted.iter().filter(|o| f(o)).count();
        let rate = |f: &dyn Fn(&SimOutcome) -> bool| Estimate::rate(count(f), n);
        let mean = |f: &dyn Fn(&SimOutcome) -> f64| {
            Estimate::from_samples(&sorted.iter().map(|o| f(o)).collect::<Vec<_>>())
        };
        let minmax: Vec<f64> = sorted.iter().filter_map(|o| o.p_minmax).collect();
        Some(Self {
            n,
            completion_rate: rate(&|o| o.terminal == Terminal::Completed)?,
            terminated_rate: rate(&|o| o.terminal == Terminal::Terminated)?,
            failure_rate: rate(&|o| o.terminal == Terminal::Failed)?,
            horizon_rate: rate(&|o| o.terminal == Terminal::HorizonReached)?,
            safety_rate: rate(&|o| o.terminal != Terminal::Failed)?,
            true_success_rate: rate(&|o| o.true_success())?,
            contingency_rate: rate(&|o| o.took_contingency)?,
            cum_reward: mean(&|o| o.cum_reward)?,
            disc_reward: mean(&|o| o.disc_reward)?,
            reward_per_step: mean(&|o| o.cum_reward / o.steps as f64)?,
            steps: mean(&|o| o.steps as f64)?,
            p_minmax: Estimate::from_samples(&minmax),
            p_minmax_min: minmax.iter().copied().reduce(f64::min),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub outcomes: Vec<SimOutcome>,
    pub summary: MetricsSummary,
}

/// Runs episodes `0..n_episodes`, in parallel, each on its own stream.
pub fn run_batch(config: &SimConfig, world: &Mdp, obs: &ObservationModel, policy: &Policy) -> Result<Batch> {
    config.validate()?;
    let outcomes = (0..config.n_episodes as u64)
        .into_par_iter()
        .map(|e| run_episode(config, world, obs, policy, e))
        .collect::<Result<Vec<_>>>()?;
    let summary = MetricsSummary::from_outcomes(&outcomes).expect("non-empty batch");
    Ok(Batch { outcomes, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, SolverConfig};
    use crate::model::{defaults, FlightStatus, MotorHealth, ReachMargin, Variable};
    use crate::pomdp::{build_observation_model, MotorObs};

    fn config(policy: PolicyKind, bh: BatteryHealth, n: usize) -> SimConfig {
        SimConfig { policy, bh, n_episodes: n, ..SimConfig::default() }
    }

    #[test]
    fn forced_completion_in_one_step() {
        let mut spec = defaults::model();
        for row in spec.factor_mut(Variable::FL).rows_mut() {
            *row = vec![1.0, 0.0];
        }
        for row in spec.factor_mut(Variable::C).rows_mut() {
            *row = vec![0.0, 1.0];
        }
        let mdp = Mdp::from_spec(&spec).unwrap();
        let z = build_observation_model(1.0).unwrap();
        let policy = Policy::new(PolicyKind::BaselineNoOp, &mdp, None, None, None).unwrap();
        let out = run_episode(&config(PolicyKind::BaselineNoOp, BatteryHealth::Good, 1), &mdp, &z, &policy, 0)
            .unwrap();
        assert_eq!(out.terminal, Terminal::Completed);
        assert_eq!(out.steps, 1);
        assert!((out.cum_reward - (0.368 + 0.163)).abs() < 1e-12);
        assert!((out.disc_reward - (0.368 + 0.99 * 0.163)).abs() < 1e-12);
        assert!(out.true_success());
    }

    #[test]
    fn terminate_at_first_step() {
        let mdp = Mdp::default_model();
        let z = build_observation_model(1.0).unwrap();
        let vf = value_iteration(&mdp, &SolverConfig::default()).unwrap();
        let mut forced = vf.clone();
        forced.policy = vec![Action::Terminate; forced.policy.len()];
        forced.policy[StateId::COMPLETE.index()..].fill(Action::NoOp);
        let policy = Policy::new(PolicyKind::TrueMdp, &mdp, Some(&forced), None, None).unwrap();
        let out = run_episode(&config(PolicyKind::TrueMdp, BatteryHealth::Good, 1), &mdp, &z, &policy, 3)
            .unwrap();
        assert_eq!(out.terminal, Terminal::Terminated);
        assert_eq!(out.steps, 1);
        assert!(out.took_contingency);
        // R(T) contributes nothing; the step reward is 0.286 - 0
        assert!((out.cum_reward - 0.286).abs() < 1e-12);
    }

    #[test]
    fn episodes_are_reproducible() {
        let mdp = Mdp::default_model();
        let z = build_observation_model(0.8).unwrap();
        let vf = value_iteration(&mdp, &SolverConfig::default()).unwrap();
        let policy = Policy::new(PolicyKind::MapMdp, &mdp, Some(&vf), Some(&z), None).unwrap();
        let cfg = SimConfig { p_obs: 0.8, ..config(PolicyKind::MapMdp, BatteryHealth::Poor, 1) };
        for e in 0..20 {
            assert_eq!(
                run_episode(&cfg, &mdp, &z, &policy, e).unwrap(),
                run_episode(&cfg, &mdp, &z, &policy, e).unwrap()
            );
        }
    }

    #[test]
    fn noop_never_terminates_or_changes_status() {
        let mdp = Mdp::default_model();
        let z = build_observation_model(1.0).unwrap();
        let policy = Policy::new(PolicyKind::BaselineNoOp, &mdp, None, None, None).unwrap();
        let batch = run_batch(&config(PolicyKind::BaselineNoOp, BatteryHealth::Poor, 500), &mdp, &z, &policy)
            .unwrap();
        assert_eq!(batch.summary.terminated_rate.mean, 0.0);
        assert_eq!(batch.summary.contingency_rate.mean, 0.0);
        let s = batch.summary;
        let total = s.completion_rate.mean + s.failure_rate.mean + s.horizon_rate.mean;
        assert!((total - 1.0).abs() < 1e-12);
        assert!((s.safety_rate.mean + s.failure_rate.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observation_sampling_is_deterministic_at_full_accuracy() {
        let z = build_observation_model(1.0).unwrap();
        let mut rng = stream(0, 0);
        let f = FactoredState::new(
            FlightStatus::EmergencyPract,
            MotorHealth::Jam,
            crate::model::MotorMargin::Negative,
            BatteryHealth::Medium,
            ReachMargin::NonNegative,
        );
        let expected = ObservationId::new(FlightStatus::EmergencyPract, MotorObs::JF, ReachMargin::NonNegative);
        for _ in 0..100 {
            assert_eq!(sample_observation(&mut rng, f.into(), Action::NoOp, &z), expected);
            assert_eq!(sample_observation(&mut rng, StateId::FAILURE, Action::NoOp, &z), ObservationId::TERMINAL);
        }
        let mdp = Mdp::default_model();
        assert_eq!(sample_transition(&mut rng, StateId::END, Action::NoOp, &mdp), StateId::END);
    }

    #[test]
    fn summary_ignores_outcome_order() {
        let mk = |episode, terminal, r| SimOutcome {
            episode,
            terminal,
            took_contingency: false,
            steps: 3,
            cum_reward: r,
            disc_reward: r,
            p_minmax: None,
        };
        let a = vec![mk(0, Terminal::Completed, 0.1), mk(1, Terminal::Failed, 0.7), mk(2, Terminal::Completed, 1e-17)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(MetricsSummary::from_outcomes(&a), MetricsSummary::from_outcomes(&b));
        let s = MetricsSummary::from_outcomes(&a).unwrap();
        assert!((s.true_success_rate.mean - 2.0 / 3.0).abs() < 1e-15);
        assert!(s.p_minmax.is_none());
    }

    #[test]
    fn all_completed_without_contingency() {
        let outcomes: Vec<SimOutcome> = (0..10)
            .map(|episode| SimOutcome {
                episode,
                terminal: Terminal::Completed,
                took_contingency: false,
                steps: 5,
                cum_reward: 1.0,
                disc_reward: 1.0,
                p_minmax: Some(1.0),
            })
            .collect();
        let s = MetricsSummary::from_outcomes(&outcomes).unwrap();
        assert_eq!(s.true_success_rate.mean, 1.0);
        assert_eq!(s.failure_rate.mean, 0.0);
        assert_eq!(s.p_minmax_min, Some(1.0));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SimConfig { horizon: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { n_episodes: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { p_obs: 0.3, ..SimConfig::default() }.validate().is_err());
    }
}
