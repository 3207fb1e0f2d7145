//! Observation space `FS × MotorObs × RM` plus a terminal symbol, and the
//! observation likelihoods parameterized by the observation accuracy `p_o`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CmaError, Result};
use crate::model::{
    Action, FactoredState, FlightStatus, MotorHealth, MotorMargin, ReachMargin, StateId,
    NUM_ACTIONS, NUM_STATES,
};

/// 18 factored observations plus `TERMINAL`.
pub const NUM_OBSERVATIONS: usize = 19;

/// What the motor channel reports: a margin sign, or a detected jam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotorObs {
    MM0,
    MM1,
    JF,
}

impl MotorObs {
    pub const ALL: [MotorObs; 3] = [MotorObs::MM0, MotorObs::MM1, MotorObs::JF];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationId(u8);

impl ObservationId {
    pub const TERMINAL: ObservationId = ObservationId(18);

    pub fn new(fs: FlightStatus, motor: MotorObs, rm: ReachMargin) -> Self {
        ObservationId(((fs.index() * 3 + motor.index()) * 2 + rm.index()) as u8)
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < NUM_OBSERVATIONS).then_some(ObservationId(i as u8))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_terminal(self) -> bool {
        self == Self::TERMINAL
    }

    /// `(fs, motor, rm)` for factored observations.
    pub fn parts(self) -> Option<(FlightStatus, MotorObs, ReachMargin)> {
        if self.is_terminal() {
            return None;
        }
        let i = self.index();
        Some((FlightStatus::ALL[i / 6], MotorObs::ALL[(i / 2) % 3], ReachMargin::ALL[i % 2]))
    }

    pub fn all() -> impl Iterator<Item = ObservationId> {
        (0..NUM_OBSERVATIONS as u8).map(ObservationId)
    }
}

impl fmt::Display for ObservationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parts() {
            Some((fs, m, rm)) => write!(f, "({fs},{m:?},{rm})"),
            None => f.write_str("TERMINAL"),
        }
    }
}

/// Observation likelihoods `z[a][s'][o]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub p_o: Option<f64>,
    n_states: usize,
    n_obs: usize,
    z: Vec<f64>,
    /// Nonzero `(o, z)` per `(a, s')`, ascending in `o`.
    #[serde(skip)]
    support: Vec<Vec<(usize, f64)>>,
}

impl ObservationModel {
    /// Wraps a dense `[a][s'][o]` tensor; rows must be stochastic.
    pub fn from_dense(n_states: usize, n_obs: usize, z: Vec<f64>) -> Result<Self> {
        if z.len() != NUM_ACTIONS * n_states * n_obs {
            return Err(CmaError::Construction {
                location: "observation model".into(),
                message: format!("expected {} entries, got {}", NUM_ACTIONS * n_states * n_obs, z.len()),
            });
        }
        for (r, row) in z.chunks(n_obs).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(CmaError::Construction {
                    location: format!("observation row a={} s'={}", r / n_states, r % n_states),
                    message: format!("not a distribution (sum {sum})"),
                });
            }
        }
        let mut m = Self { p_o: None, n_states, n_obs, z, support: vec![] };
        m.index_support();
        Ok(m)
    }

    fn index_support(&mut self) {
        self.support = self
            .z
            .chunks(self.n_obs)
            .map(|row| row.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(o, p)| (o, *p)).collect())
            .collect();
    }

    pub fn num_states(&self) -> usize {
        self.n_states
    }

    pub fn num_observations(&self) -> usize {
        self.n_obs
    }

    #[inline]
    pub fn prob(&self, a: usize, next: usize, o: usize) -> f64 {
        self.z[(a * self.n_states + next) * self.n_obs + o]
    }

    pub fn row(&self, a: usize, next: usize) -> &[f64] {
        let start = (a * self.n_states + next) * self.n_obs;
        &self.z[start..start + self.n_obs]
    }

    /// Observations with nonzero likelihood at `s'`.
    #[inline]
    pub fn support(&self, a: usize, next: usize) -> &[(usize, f64)] {
        &self.support[a * self.n_states + next]
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            p_o: Option<f64>,
            num_states: usize,
            num_observations: usize,
            z: Vec<Vec<&'a [f64]>>,
        }
        let z = (0..NUM_ACTIONS)
            .map(|a| (0..self.n_states).map(|s| self.row(a, s)).collect())
            .collect();
        Ok(serde_json::to_string_pretty(&Export {
            p_o: self.p_o,
            num_states: self.n_states,
            num_observations: self.n_obs,
            z,
        })?)
    }
}

/// Distribution of the factored observation emitted by a live state.
fn emission(s: &FactoredState, p_o: f64) -> [f64; NUM_OBSERVATIONS] {
    let mut z = [0.0; NUM_OBSERVATIONS];
    let flip = 1.0 - p_o;
    let motor: &[(MotorObs, f64)] = match (s.mh, s.mm) {
        (MotorHealth::Jam, _) => &[(MotorObs::JF, 1.0)],
        (_, MotorMargin::NonNegative) => &[(MotorObs::MM1, p_o), (MotorObs::MM0, flip)],
        (_, MotorMargin::Negative) => &[(MotorObs::MM0, p_o), (MotorObs::MM1, flip)],
    };
    let other_rm = match s.rm {
        ReachMargin::Negative => ReachMargin::NonNegative,
        ReachMargin::NonNegative => ReachMargin::Negative,
    };
    for &(m, pm) in motor {
        z[ObservationId::new(s.fs, m, s.rm).index()] += pm * p_o;
        z[ObservationId::new(s.fs, m, other_rm).index()] += pm * flip;
    }
    z
}

/// Flight status is observed exactly; RM and the motor margin are each
/// reported correctly with probability `p_o`, independently; a jam fault is
/// always reported as `JF`; battery health is never observed. Absorbing
/// states emit `TERMINAL`.
pub fn build_observation_model(p_o: f64) -> Result<ObservationModel> {
    if !(0.5..=1.0).contains(&p_o) {
        return Err(CmaError::Domain(format!("observation accuracy {p_o} outside [0.5, 1]")));
    }
    let mut z = vec![0.0; NUM_ACTIONS * NUM_STATES * NUM_OBSERVATIONS];
    for a in 0..NUM_ACTIONS {
        for s in StateId::all() {
            let row = &mut z[(a * NUM_STATES + s.index()) * NUM_OBSERVATIONS..][..NUM_OBSERVATIONS];
            match s.factored() {
                Some(f) => row.copy_from_slice(&emission(&f, p_o)),
                None => row[ObservationId::TERMINAL.index()] = 1.0,
            }
        }
    }
    let mut m = ObservationModel::from_dense(NUM_STATES, NUM_OBSERVATIONS, z)?;
    m.p_o = Some(p_o);
    Ok(m)
}

/// Likelihood of `o` after taking `a` and landing in `s'`.
pub fn observation_prob(model: &ObservationModel, a: Action, next: StateId, o: ObservationId) -> f64 {
    model.prob(a.index(), next.index(), o.index())
}
