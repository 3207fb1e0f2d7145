//! Beliefs over states, exact Bayes filtering and concentration statistics.

use serde::{Deserialize, Serialize};

use super::observation::ObservationModel;
use crate::error::{CmaError, Result};
use crate::model::{BatteryHealth, FactoredState, StateId, TransitionModel, NUM_STATES};

const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Checks nonnegativity and unit mass within 1e-12.
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(CmaError::Domain("empty belief".into()));
        }
        if let Some(i) = b.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(CmaError::Domain(format!("belief entry {i} is {}", b[i])));
        }
        let sum: f64 = b.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(CmaError::Domain(format!("belief sums to {sum}")));
        }
        Ok(Self(b))
    }

    /// Scales a nonnegative vector to unit mass.
    pub fn normalized(mut b: Vec<f64>) -> Result<Self> {
        let sum: f64 = b.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(CmaError::Domain(format!("cannot normalize mass {sum}")));
        }
        b.iter_mut().for_each(|x| *x /= sum);
        Self::new(b)
    }

    pub fn delta(n: usize, s: usize) -> Self {
        let mut b = vec![0.0; n];
        b[s] = 1.0;
        Self(b)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest probability.
    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Nonzero entries in ascending state order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(s, p)| (s, *p))
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.support().map(|(s, p)| p * v[s]).sum()
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// `b'(s') ∝ z[a][s'][o] · Σ_s P[a][s][s'] b(s)`.
///
/// Fails when the observation has zero probability under the prediction,
/// which means the model and the trace disagree.
pub fn belief_update(
    b: &Belief,
    a: usize,
    o: usize,
    transitions: &TransitionModel,
    observations: &ObservationModel,
) -> Result<Belief> {
    let n = transitions.num_states();
    let mut next = vec![0.0; n];
    transitions.predict(a, b.as_slice(), &mut next);
    for (s, x) in next.iter_mut().enumerate() {
        *x *= observations.prob(a, s, o);
    }
    let norm: f64 = next.iter().sum();
    if norm <= 0.0 {
        return Err(CmaError::Inconsistent(format!(
            "observation {o} has zero probability after action {a}"
        )));
    }
    next.iter_mut().for_each(|x| *x /= norm);
    Ok(Belief(next))
}

/// Most likely state, lowest index on ties.
pub fn map_state(b: &Belief) -> usize {
    let mut best = 0;
    for (s, &p) in b.as_slice().iter().enumerate() {
        if p > b.as_slice()[best] {
            best = s;
        }
    }
    best
}

/// Minimum over time of the largest belief probability. `None` for an empty
/// trajectory.
pub fn p_minmax<'a>(traj: impl IntoIterator<Item = &'a Belief>) -> Option<f64> {
    traj.into_iter().map(Belief::max_prob).reduce(f64::min)
}

/// Delta at the nominal start state with battery health `bh`.
pub fn initial_belief(bh: BatteryHealth) -> Belief {
    Belief::delta(NUM_STATES, StateId::from(FactoredState::nominal(bh)).index())
}

/// Uniform over the three nominal start states, for runs where battery
/// health is not known at takeoff.
pub fn diffuse_bh_belief() -> Belief {
    let mut b = vec![0.0; NUM_STATES];
    for bh in BatteryHealth::ALL {
        b[StateId::from(FactoredState::nominal(*bh)).index()] = 1.0 / 3.0;
    }
    Belief(b)
}
