//! Reward model `R(S,A) = R(S) + R(A)`.
//!
//! Live states score `w_s · f_S(s)` plus the action term `w_a(a) · f_A(a)`.
//! Absorbing states score `w_e(s) · f_E(s)` once, with no action term.

use serde::{Deserialize, Serialize};

use super::state::{
    is_legal, Absorbing, Action, BatteryHealth, FactoredState, FlightStatus, MotorHealth,
    MotorMargin, ReachMargin, State, StateId, NUM_ACTIONS,
};
use crate::error::{CmaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingWeights {
    #[serde(rename = "C")]
    pub complete: f64,
    #[serde(rename = "T")]
    pub terminated: f64,
    #[serde(rename = "FL")]
    pub failure: f64,
    #[serde(rename = "E")]
    pub end: f64,
}

impl AbsorbingWeights {
    pub fn get(&self, a: Absorbing) -> f64 {
        match a {
            Absorbing::Complete => self.complete,
            Absorbing::Terminated => self.terminated,
            Absorbing::Failure => self.failure,
            Absorbing::End => self.end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionWeights {
    #[serde(rename = "NoOp")]
    pub noop: f64,
    #[serde(rename = "Terminate")]
    pub terminate: f64,
    #[serde(rename = "LandASAP")]
    pub land_asap: f64,
    #[serde(rename = "LandPract")]
    pub land_pract: f64,
}

impl ActionWeights {
    pub fn get(&self, a: Action) -> f64 {
        match a {
            Action::NoOp => self.noop,
            Action::Terminate => self.terminate,
            Action::LandAsap => self.land_asap,
            Action::LandPract => self.land_pract,
        }
    }
}

/// Reward weights `w_E`, `w_S` (over FS, MH, MM, BH, RM) and `w_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub w_e: AbsorbingWeights,
    pub w_s: [f64; 5],
    pub w_a: ActionWeights,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_e: AbsorbingWeights { complete: 0.163, terminated: 0.0, failure: 0.408, end: 0.0 },
            w_s: [0.0, 0.0, 0.082, 0.041, 0.163],
            w_a: ActionWeights { noop: 0.082, terminate: 0.0, land_asap: 0.02, land_pract: 0.041 },
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_e.complete,
            self.w_e.terminated,
            self.w_e.failure,
            self.w_e.end,
            self.w_a.noop,
            self.w_a.terminate,
            self.w_a.land_asap,
            self.w_a.land_pract,
        ];
        if all.iter().chain(self.w_s.iter()).all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(CmaError::Construction { location: "weights".into(), message: "non-finite weight".into() })
        }
    }

    /// `|R(s,a)| ≤ Σ|w_s| + max|w_a| + max w_e`, with every feature score in [-1, 1].
    pub fn bound(&self) -> f64 {
        let ws: f64 = self.w_s.iter().map(|w| w.abs()).sum();
        let wa = Action::ALL.iter().map(|&a| self.w_a.get(a).abs()).fold(0.0, f64::max);
        let we = Absorbing::ALL.iter().map(|&a| self.w_e.get(a).abs()).fold(0.0, f64::max);
        ws + wa + we
    }
}

pub fn f_end(a: Absorbing) -> f64 {
    match a {
        Absorbing::Complete => 1.0,
        Absorbing::Terminated => -0.1,
        Absorbing::Failure => -1.0,
        Absorbing::End => 0.0,
    }
}

pub fn f_action(a: Action) -> f64 {
    match a {
        Action::NoOp => 1.0,
        Action::Terminate => -1.0,
        Action::LandAsap => -0.5,
        Action::LandPract => 0.5,
    }
}

/// Feature scores `[FS, MH, MM, BH, RM]`.
pub fn f_state(s: &FactoredState) -> [f64; 5] {
    [
        match s.fs {
            FlightStatus::Nominal => 1.0,
            FlightStatus::EmergencyAsap | FlightStatus::EmergencyPract => -1.0,
        },
        match s.mh {
            MotorHealth::NoFault => 1.0,
            MotorHealth::Spalling => 0.0,
            MotorHealth::Jam => -1.0,
        },
        match s.mm {
            MotorMargin::NonNegative => 1.0,
            MotorMargin::Negative => -1.0,
        },
        match s.bh {
            BatteryHealth::Good => 1.0,
            BatteryHealth::Medium => 0.0,
            BatteryHealth::Poor => -1.0,
        },
        match s.rm {
            ReachMargin::NonNegative => 1.0,
            ReachMargin::Negative => -1.0,
        },
    ]
}

/// Tabulated rewards for every (state, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    weights: Option<RewardWeights>,
    r: Vec<[f64; NUM_ACTIONS]>,
}

impl RewardModel {
    pub fn new(weights: RewardWeights) -> Self {
        let r = StateId::all()
            .map(|s| {
                let mut row = [0.0; NUM_ACTIONS];
                for a in Action::ALL {
                    // illegal pairs take the NoOp value
                    let act = if is_legal(s, *a) { *a } else { Action::NoOp };
                    row[a.index()] = raw_reward(&weights, s, act);
                }
                row
            })
            .collect();
        Self { weights: Some(weights), r }
    }

    /// A raw reward table, for models other than the contingency model.
    pub fn from_table(r: Vec<[f64; NUM_ACTIONS]>) -> Self {
        Self { weights: None, r }
    }

    pub fn weights(&self) -> Option<&RewardWeights> {
        self.weights.as_ref()
    }

    /// Reward of a legal pair.
    pub fn reward(&self, s: StateId, a: Action) -> Result<f64> {
        if !is_legal(s, a) {
            return Err(CmaError::IllegalAction { state: s.to_string(), action: a.to_string() });
        }
        Ok(self.r[s.index()][a.index()])
    }

    /// Total table lookup; illegal pairs return the NoOp reward.
    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.r[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64; NUM_ACTIONS] {
        &self.r[s]
    }

    pub fn num_states(&self) -> usize {
        self.r.len()
    }
}

fn raw_reward(w: &RewardWeights, s: StateId, a: Action) -> f64 {
    match s.decode() {
        State::Live(f) => {
            let fs = f_state(&f);
            let state: f64 = w.w_s.iter().zip(fs.iter()).map(|(w, f)| w * f).sum();
            state + w.w_a.get(a) * f_action(a)
        }
        State::Absorbing(x) => w.w_e.get(x) * f_end(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::state::NUM_STATES;

    fn live(fs: FlightStatus, mh: MotorHealth, mm: MotorMargin, bh: BatteryHealth, rm: ReachMargin) -> StateId {
        FactoredState::new(fs, mh, mm, bh, rm).into()
    }

    #[test]
    fn reward_examples() {
        let r = RewardModel::new(RewardWeights::default());
        let s = live(
            FlightStatus::Nominal,
            MotorHealth::NoFault,
            MotorMargin::NonNegative,
            BatteryHealth::Good,
            ReachMargin::NonNegative,
        );
        assert!((r.reward(s, Action::NoOp).unwrap() - 0.368).abs() < 1e-12);
        assert!((r.reward(StateId::COMPLETE, Action::NoOp).unwrap() - 0.163).abs() < 1e-12);
        let worst = live(
            FlightStatus::EmergencyAsap,
            MotorHealth::Jam,
            MotorMargin::Negative,
            BatteryHealth::Poor,
            ReachMargin::Negative,
        );
        assert!((r.reward(worst, Action::Terminate).unwrap() + 0.286).abs() < 1e-12);
        assert!((r.reward(StateId::FAILURE, Action::NoOp).unwrap() + 0.408).abs() < 1e-12);
        assert_eq!(r.reward(StateId::TERMINATED, Action::NoOp).unwrap(), 0.0);
        assert_eq!(r.reward(StateId::END, Action::NoOp).unwrap(), 0.0);
    }

    #[test]
    fn illegal_pair_is_an_error_but_tabulated_as_noop() {
        let r = RewardModel::new(RewardWeights::default());
        let s = live(
            FlightStatus::EmergencyAsap,
            MotorHealth::NoFault,
            MotorMargin::NonNegative,
            BatteryHealth::Good,
            ReachMargin::NonNegative,
        );
        assert!(r.reward(s, Action::LandPract).is_err());
        assert_eq!(r.get(s.index(), Action::LandPract.index()), r.get(s.index(), 0));
        assert!(r.reward(StateId::END, Action::Terminate).is_err());
    }

    #[test]
    fn bounded_by_weight_norms() {
        let w = RewardWeights::default();
        let bound = w.bound();
        let r = RewardModel::new(w);
        for s in 0..NUM_STATES {
            for a in 0..NUM_ACTIONS {
                assert!(r.get(s, a).abs() <= bound + 1e-15);
            }
        }
    }
}
