//! Discounted infinite-horizon value iteration for the fully observable model.

use serde::{Deserialize, Serialize};

use crate::error::{CmaError, Result};
use crate::model::{Action, Mdp, NUM_ACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub discount: f64,
    pub bellman_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { discount: 0.99, bellman_tolerance: 1e-9, max_iterations: 100_000 }
    }
}

impl SolverConfig {
    pub fn with_discount(discount: f64) -> Self {
        Self { discount, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(CmaError::Domain(format!("discount {} outside (0,1)", self.discount)));
        }
        if self.bellman_tolerance.is_nan() || self.bellman_tolerance <= 0.0 {
            return Err(CmaError::Domain("bellman tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(CmaError::Domain("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Optimal values, Q-values and greedy policy, indexed by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub discount: f64,
    pub iterations: usize,
    pub residual: f64,
    pub v: Vec<f64>,
    pub q: Vec<[f64; NUM_ACTIONS]>,
    pub policy: Vec<Action>,
    /// Sup-norm residual of every sweep.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl ValueFunction {
    pub fn action(&self, s: usize) -> Action {
        self.policy[s]
    }

    /// Best legal action by Q-value, ties to the lowest index.
    pub fn best_legal(&self, mdp: &Mdp, s: usize, allowed: impl Fn(Action) -> bool) -> Action {
        greedy(&self.q[s], |a| mdp.is_legal(s, a) && allowed(Action::ALL[a]))
            .map(|a| Action::ALL[a])
            .unwrap_or(Action::NoOp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Index of the largest `q[a]` among admissible actions, lowest index on ties.
pub(crate) fn greedy(q: &[f64; NUM_ACTIONS], admissible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for a in 0..NUM_ACTIONS {
        if admissible(a) && best.is_none_or(|b| q[a] > q[b]) {
            best = Some(a);
        }
    }
    best
}

/// One synchronous Bellman backup. Returns the new values and the Q-matrix
/// computed from `v`.
pub fn bellman_backup(v: &[f64], mdp: &Mdp, discount: f64) -> (Vec<f64>, Vec<[f64; NUM_ACTIONS]>) {
    let n = mdp.num_states();
    let mut q = vec![[0.0; NUM_ACTIONS]; n];
    let mut next = vec![0.0; n];
    for (s, (qs, vs)) in q.iter_mut().zip(next.iter_mut()).enumerate() {
        for (a, x) in qs.iter_mut().enumerate() {
            let future: f64 = mdp.transitions.successors(a, s).iter().map(|&(j, p)| p * v[j]).sum();
            *x = mdp.rewards.get(s, a) + discount * future;
        }
        let best = greedy(qs, |a| mdp.is_legal(s, a)).expect("NoOp is always legal");
        *vs = qs[best];
    }
    (next, q)
}

/// Value iteration from `v = 0` until the sup-norm change between sweeps is
/// at most the configured tolerance.
pub fn value_iteration(mdp: &Mdp, config: &SolverConfig) -> Result<ValueFunction> {
    config.validate()?;
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    for it in 1..=config.max_iterations {
        let (next, q) = bellman_backup(&v, mdp, config.discount);
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        residuals.push(residual);
        v = next;
        if residual <= config.bellman_tolerance {
            let policy = (0..n)
                .map(|s| Action::ALL[greedy(&q[s], |a| mdp.is_legal(s, a)).unwrap()])
                .collect();
            return Ok(ValueFunction {
                discount: config.discount,
                iterations: it,
                residual,
                v,
                q,
                policy,
                residuals,
            });
        }
    }
    Err(CmaError::NotConverged {
        iterations: config.max_iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
    })
}
