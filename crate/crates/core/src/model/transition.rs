//! Action-indexed transition tensors and their assembly from factor tables.

use super::factors::{ModelSpec, Variable};
use super::state::{
    is_legal, Action, BatteryHealth, FactoredState, FlightStatus, MotorHealth, MotorMargin,
    ReachMargin, StateId, NUM_ACTIONS, NUM_STATES,
};
use crate::error::{CmaError, Result};

/// Row-stochastic transition tensor `P[a][s][s']`.
///
/// Stored densely for lookup and as ascending sparse rows for sampling and
/// belief propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    n: usize,
    dense: Vec<f64>,
    sparse: Vec<Vec<(usize, f64)>>,
}

impl TransitionModel {
    /// Wraps a dense `[a][s][s']` tensor without checking stochasticity;
    /// see [`crate::model::validate_model`].
    pub fn from_dense(n_states: usize, dense: Vec<f64>) -> Self {
        assert_eq!(dense.len(), NUM_ACTIONS * n_states * n_states, "tensor shape");
        let sparse = dense
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(j, p)| (j, *p))
                    .collect()
            })
            .collect();
        Self { n: n_states, dense, sparse }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn prob(&self, a: usize, s: usize, next: usize) -> f64 {
        self.dense[(a * self.n + s) * self.n + next]
    }

    pub fn row(&self, a: usize, s: usize) -> &[f64] {
        let start = (a * self.n + s) * self.n;
        &self.dense[start..start + self.n]
    }

    /// Nonzero successors of `(s, a)` in ascending state order.
    #[inline]
    pub fn successors(&self, a: usize, s: usize) -> &[(usize, f64)] {
        &self.sparse[a * self.n + s]
    }

    /// `Σ_s b(s) P[a][s][·]`.
    pub fn predict(&self, a: usize, b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (s, &bs) in b.iter().enumerate() {
            if bs == 0.0 {
                continue;
            }
            for &(j, p) in self.successors(a, s) {
                out[j] += bs * p;
            }
        }
    }
}

/// Assembles the 4×112×112 tensor from the factor tables.
///
/// From a live state: `Terminate` moves to `T` with probability one.
/// Otherwise the failure trigger fires first, then completion, then the
/// factored successor is the product of the five feature factors. `C`, `T`
/// and `FL` move to `E`; `E` is absorbing. Illegal (state, action) pairs
/// copy the NoOp row.
pub fn build_transition(spec: &ModelSpec) -> Result<TransitionModel> {
    spec.validate()?;
    let n = NUM_STATES;
    let mut dense = vec![0.0; NUM_ACTIONS * n * n];
    let fs_f = spec.factor(Variable::FS);
    let mh_f = spec.factor(Variable::MH);
    let mm_f = spec.factor(Variable::MM);
    let bh_f = spec.factor(Variable::BH);
    let rm_f = spec.factor(Variable::RM);
    let c_f = spec.factor(Variable::C);
    let fl_f = spec.factor(Variable::FL);

    for &a in Action::ALL {
        for s in StateId::all() {
            let row = &mut dense[(a.index() * n + s.index()) * n..][..n];
            let Some(f) = s.factored() else {
                row[StateId::END.index()] = 1.0;
                continue;
            };
            let act = if is_legal(s, a) { a } else { Action::NoOp };
            if act == Action::Terminate {
                row[StateId::TERMINATED.index()] = 1.0;
                continue;
            }
            let p_fail = fl_f.fires(&f, act);
            let p_complete = (1.0 - p_fail) * c_f.fires(&f, act);
            let p_live = (1.0 - p_fail) * (1.0 - c_f.fires(&f, act));
            row[StateId::FAILURE.index()] += p_fail;
            row[StateId::COMPLETE.index()] += p_complete;
            if p_live == 0.0 {
                continue;
            }
            let d_fs = fs_f.distribution(&f, act);
            let d_mh = mh_f.distribution(&f, act);
            let d_mm = mm_f.distribution(&f, act);
            let d_bh = bh_f.distribution(&f, act);
            let d_rm = rm_f.distribution(&f, act);
            for (i_fs, &p_fs) in d_fs.iter().enumerate().filter(|x| *x.1 > 0.0) {
                for (i_mh, &p_mh) in d_mh.iter().enumerate().filter(|x| *x.1 > 0.0) {
                    for (i_mm, &p_mm) in d_mm.iter().enumerate().filter(|x| *x.1 > 0.0) {
                        for (i_bh, &p_bh) in d_bh.iter().enumerate().filter(|x| *x.1 > 0.0) {
                            for (i_rm, &p_rm) in d_rm.iter().enumerate().filter(|x| *x.1 > 0.0) {
                                let next = FactoredState::new(
                                    FlightStatus::ALL[i_fs],
                                    MotorHealth::ALL[i_mh],
                                    MotorMargin::ALL[i_mm],
                                    BatteryHealth::ALL[i_bh],
                                    ReachMargin::ALL[i_rm],
                                );
                                row[next.index()] += p_live * p_fs * p_mh * p_mm * p_bh * p_rm;
                            }
                        }
                    }
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(CmaError::Construction {
                    location: format!("row {s} under {a}"),
                    message: format!("assembled row sums to {sum}"),
                });
            }
        }
    }
    Ok(TransitionModel::from_dense(n, dense))
}
