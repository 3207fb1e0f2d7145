//! The five evaluated decision rules behind one interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CmaError, Result};
use crate::mdp::ValueFunction;
use crate::model::{
    Action, BatteryHealth, FactoredState, Mdp, MotorHealth, MotorMargin, StateId,
};
use crate::pomdp::{
    belief_update, legal_at_belief, map_state, AlphaSet, Belief, MotorObs, ObservationId,
    ObservationModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[serde(rename = "noop")]
    BaselineNoOp,
    TrueMdp,
    ObsMdp,
    MapMdp,
    Pomdp,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::BaselineNoOp,
        PolicyKind::TrueMdp,
        PolicyKind::ObsMdp,
        PolicyKind::MapMdp,
        PolicyKind::Pomdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::BaselineNoOp => "noop",
            PolicyKind::TrueMdp => "true_mdp",
            PolicyKind::ObsMdp => "obs_mdp",
            PolicyKind::MapMdp => "map_mdp",
            PolicyKind::Pomdp => "pomdp",
        }
    }

    /// Whether the rule reads observations at all.
    pub fn depends_on_observations(self) -> bool {
        !matches!(self, PolicyKind::BaselineNoOp | PolicyKind::TrueMdp)
    }

    pub fn tracks_belief(self) -> bool {
        matches!(self, PolicyKind::MapMdp | PolicyKind::Pomdp)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = CmaError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CmaError::Parse(format!("unknown policy '{s}' (expected noop, true_mdp, obs_mdp, map_mdp or pomdp)")))
    }
}

pub fn noop_action() -> Action {
    Action::NoOp
}

pub fn true_mdp_action(s: StateId, vf: &ValueFunction) -> Action {
    vf.action(s.index())
}

/// The state an observation is taken to be: flight status and RM as read,
/// battery health as known at takeoff, motor health from the motor channel.
pub fn reconstruct_state(o: ObservationId, bh: BatteryHealth) -> Option<FactoredState> {
    let (fs, motor, rm) = o.parts()?;
    let (mh, mm) = match motor {
        MotorObs::MM1 => (MotorHealth::NoFault, MotorMargin::NonNegative),
        MotorObs::MM0 => (MotorHealth::Spalling, MotorMargin::Negative),
        MotorObs::JF => (MotorHealth::Jam, MotorMargin::Negative),
    };
    Some(FactoredState { fs, mh, mm, bh, rm })
}

/// MDP action at `s`, or the best action by Q-value among `legal` when the
/// policy's choice is not in it.
fn with_fallback(vf: &ValueFunction, mdp: &Mdp, s: usize, legal: &[usize]) -> Action {
    let a = vf.action(s);
    if legal.contains(&a.index()) {
        a
    } else {
        vf.best_legal(mdp, s, |x| legal.contains(&x.index()))
    }
}

pub fn obs_mdp_action(o: ObservationId, bh: BatteryHealth, vf: &ValueFunction, mdp: &Mdp) -> Action {
    let Some(f) = reconstruct_state(o, bh) else { return Action::NoOp };
    let s = StateId::from(f).index();
    let legal: Vec<usize> = crate::model::legal_actions_for_status(f.fs).iter().map(|a| a.index()).collect();
    with_fallback(vf, mdp, s, &legal)
}

pub fn map_mdp_action(b: &Belief, vf: &ValueFunction, mdp: &Mdp) -> Action {
    let s = map_state(b);
    let legal: Vec<usize> = mdp.legal_actions(s).map(|a| a.index()).collect();
    with_fallback(vf, mdp, s, &legal)
}

/// Action of the best alpha at `b`; if that action is illegal for the
/// belief, the best alpha with a legal action.
pub fn pomdp_action(b: &Belief, alphas: &AlphaSet, mdp: &Mdp) -> Action {
    let legal = legal_at_belief(mdp, b);
    let mut best: Option<(Action, f64)> = None;
    for alpha in alphas.alphas() {
        if !legal.contains(&alpha.action.index()) {
            continue;
        }
        let v = alpha.value(b);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((alpha.action, v));
        }
    }
    best.map(|x| x.0).unwrap_or(Action::NoOp)
}

/// Per-episode state of a policy.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    pub belief: Option<Belief>,
    pub bh: BatteryHealth,
    pub start: StateId,
    pub last_observation: Option<ObservationId>,
    pub last_action: Option<Action>,
    /// Running minimum of the largest belief probability.
    pub min_max_belief: Option<f64>,
}

/// A policy bound to its solved assets.
#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub kind: PolicyKind,
    pub mdp: &'a Mdp,
    vf: Option<&'a ValueFunction>,
    observations: Option<&'a ObservationModel>,
    alphas: Option<&'a AlphaSet>,
}

impl<'a> Policy<'a> {
    /// Checks that the assets the rule needs are present.
    pub fn new(
        kind: PolicyKind,
        mdp: &'a Mdp,
        vf: Option<&'a ValueFunction>,
        observations: Option<&'a ObservationModel>,
        alphas: Option<&'a AlphaSet>,
    ) -> Result<Self> {
        let missing = |what: &str| CmaError::Domain(format!("policy {kind} requires {what}"));
        match kind {
            PolicyKind::BaselineNoOp => {}
            PolicyKind::TrueMdp | PolicyKind::ObsMdp => {
                vf.ok_or_else(|| missing("a value function"))?;
            }
            PolicyKind::MapMdp => {
                vf.ok_or_else(|| missing("a value function"))?;
                observations.ok_or_else(|| missing("an observation model"))?;
            }
            PolicyKind::Pomdp => {
                alphas.ok_or_else(|| missing("an alpha set"))?;
                observations.ok_or_else(|| missing("an observation model"))?;
            }
        }
        Ok(Self { kind, mdp, vf, observations, alphas })
    }

    /// Fresh context for an episode starting at `start` with prior `prior`.
    pub fn start(&self, start: StateId, bh: BatteryHealth, prior: Belief) -> PolicyContext {
        let tracks = self.kind.tracks_belief();
        PolicyContext {
            min_max_belief: tracks.then(|| prior.max_prob()),
            belief: tracks.then_some(prior),
            bh,
            start,
            last_observation: None,
            last_action: None,
        }
    }

    /// The decision at the current step. Only `TrueMdp` reads `true_state`.
    pub fn act(&self, ctx: &PolicyContext, true_state: StateId) -> Action {
        match self.kind {
            PolicyKind::BaselineNoOp => noop_action(),
            PolicyKind::TrueMdp => true_mdp_action(true_state, self.vf.unwrap()),
            PolicyKind::ObsMdp => match ctx.last_observation {
                Some(o) => obs_mdp_action(o, ctx.bh, self.vf.unwrap(), self.mdp),
                None => self.vf.unwrap().action(ctx.start.index()),
            },
            PolicyKind::MapMdp => map_mdp_action(ctx.belief.as_ref().unwrap(), self.vf.unwrap(), self.mdp),
            PolicyKind::Pomdp => pomdp_action(ctx.belief.as_ref().unwrap(), self.alphas.unwrap(), self.mdp),
        }
    }

    /// Folds the action taken and the observation received into the context.
    pub fn observe(&self, ctx: &mut PolicyContext, a: Action, o: ObservationId) -> Result<()> {
        ctx.last_action = Some(a);
        ctx.last_observation = Some(o);
        if let Some(b) = ctx.belief.as_mut() {
            let z = self.observations.unwrap();
            *b = belief_update(b, a.index(), o.index(), &self.mdp.transitions, z)?;
            let m = b.max_prob();
            ctx.min_max_belief = ctx.min_max_belief.map(|x| x.min(m));
        }
        Ok(())
    }
}
