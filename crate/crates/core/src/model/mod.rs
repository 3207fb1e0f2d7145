//! The contingency management MDP: state/action spaces, margins, factor
//! tables, transition assembly and rewards.

pub mod factors;
pub mod margins;
pub mod reward;
pub mod state;
pub mod transition;

use serde::Serialize;

pub use factors::{defaults, FactorTable, ModelSpec, Variable};
pub use margins::{
    discretize_margins, motor_margin, reachability_margin, BatteryPrognosis, MotorPrognosis,
};
pub use reward::{RewardModel, RewardWeights};
pub use state::{
    is_legal, legal_actions, legal_actions_for_status, Absorbing, Action, BatteryHealth,
    FactoredState, FlightStatus, MotorHealth, MotorMargin, ReachMargin, State, StateId,
    NUM_ACTIONS, NUM_FACTORED, NUM_STATES,
};
pub use transition::{build_transition, TransitionModel};

use crate::error::{CmaError, Result};

/// Transition and reward tables with a legality mask.
///
/// Illegal pairs must carry the NoOp row and reward; solvers and policies
/// consult the mask to exclude them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub transitions: TransitionModel,
    pub rewards: RewardModel,
    legal: Vec<[bool; NUM_ACTIONS]>,
}

impl Mdp {
    /// Builds the contingency model from factor tables and weights.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let transitions = build_transition(spec)?;
        let rewards = RewardModel::new(spec.weights.clone());
        let legal = StateId::all()
            .map(|s| {
                let mut m = [false; NUM_ACTIONS];
                for a in legal_actions(s) {
                    m[a.index()] = true;
                }
                m
            })
            .collect();
        Ok(Self { transitions, rewards, legal })
    }

    /// The contingency model with shipped defaults.
    pub fn default_model() -> Self {
        Self::from_spec(&defaults::model()).expect("defaults build")
    }

    /// A general finite model; NoOp (index 0) must be legal everywhere.
    pub fn new(
        transitions: TransitionModel,
        rewards: RewardModel,
        legal: Vec<[bool; NUM_ACTIONS]>,
    ) -> Result<Self> {
        let n = transitions.num_states();
        if rewards.num_states() != n || legal.len() != n {
            return Err(CmaError::Construction {
                location: "mdp".into(),
                message: format!(
                    "size mismatch: {n} transition states, {} reward rows, {} legality rows",
                    rewards.num_states(),
                    legal.len()
                ),
            });
        }
        if let Some(s) = legal.iter().position(|m| !m[0]) {
            return Err(CmaError::Construction {
                location: format!("state {s}"),
                message: "NoOp must be legal in every state".into(),
            });
        }
        Ok(Self { transitions, rewards, legal })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    #[inline]
    pub fn is_legal(&self, s: usize, a: usize) -> bool {
        self.legal[s][a]
    }

    pub fn legal_actions(&self, s: usize) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.iter().copied().filter(move |a| self.legal[s][a.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonStochasticRow { action: String, state: usize, sum: f64 },
    EntryOutOfRange { action: String, state: usize, next: usize, value: f64 },
    /// Illegal pair whose transition row or reward differs from NoOp's.
    IllegalPairMismatch { action: String, state: usize },
    Construction { message: String },
}

/// Outcome of [`validate_model`]. Unreachable states are informational.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Per action, states with no incoming probability from any state.
    pub unreachable: Vec<(String, Vec<usize>)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn from_error(e: &CmaError) -> Self {
        Self {
            violations: vec![Violation::Construction { message: e.to_string() }],
            unreachable: vec![],
        }
    }
}

/// Checks stochasticity, illegal-pair conventions and reachability.
pub fn validate_model(mdp: &Mdp) -> ValidationReport {
    let t = &mdp.transitions;
    let n = t.num_states();
    let mut report = ValidationReport::default();
    for &a in Action::ALL {
        let ai = a.index();
        let mut reached = vec![false; n];
        for s in 0..n {
            let row = t.row(ai, s);
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    report.violations.push(Violation::EntryOutOfRange {
                        action: a.to_string(),
                        state: s,
                        next: j,
                        value: p,
                    });
                }
                if p > 0.0 {
                    reached[j] = true;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                report.violations.push(Violation::NonStochasticRow {
                    action: a.to_string(),
                    state: s,
                    sum,
                });
            }
            if !mdp.is_legal(s, ai)
                && (row != t.row(0, s) || mdp.rewards.get(s, ai) != mdp.rewards.get(s, 0))
            {
                report
                    .violations
                    .push(Violation::IllegalPairMismatch { action: a.to_string(), state: s });
            }
        }
        let missing: Vec<usize> = (0..n).filter(|&j| !reached[j]).collect();
        if !missing.is_empty() {
            report.unreachable.push((a.to_string(), missing));
        }
    }
    report
}

/// Parses a model document and validates the assembled model, folding
/// construction errors into the report.
pub fn validate_document(text: &str) -> ValidationReport {
    match ModelSpec::from_json(text).and_then(|spec| Mdp::from_spec(&spec)) {
        Ok(mdp) => validate_model(&mdp),
        Err(e) => ValidationReport::from_error(&e),
    }
}
