//! Alpha-vector value functions: QMDP and point-based value iteration.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::belief::{belief_update, initial_belief, Belief};
use super::observation::ObservationModel;
use crate::error::{CmaError, Result};
use crate::mdp::ValueFunction;
use crate::model::{Action, BatteryHealth, Mdp, NUM_ACTIONS};
use crate::sampling::{sample_categorical, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub action: Action,
}

impl AlphaVector {
    pub fn value(&self, b: &Belief) -> f64 {
        b.dot(&self.values)
    }

    fn key(&self) -> (Vec<u64>, Action) {
        (self.values.iter().map(|v| v.to_bits()).collect(), self.action)
    }
}

/// A piecewise-linear value function `V(b) = max_k α_k · b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSet {
    alphas: Vec<AlphaVector>,
}

impl AlphaSet {
    pub fn new(alphas: Vec<AlphaVector>) -> Result<Self> {
        let Some(n) = alphas.first().map(|a| a.values.len()) else {
            return Err(CmaError::Domain("empty alpha set".into()));
        };
        if alphas.iter().any(|a| a.values.len() != n || a.values.iter().any(|v| !v.is_finite())) {
            return Err(CmaError::Domain("alpha vectors must be finite and of equal length".into()));
        }
        Ok(Self { alphas })
    }

    pub fn alphas(&self) -> &[AlphaVector] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Index and value of the maximizing alpha, lowest index on ties.
    pub fn best(&self, b: &Belief) -> (usize, f64) {
        best_alpha(&self.alphas, b)
    }

    pub fn value(&self, b: &Belief) -> f64 {
        self.best(b).1
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AlphaSet = serde_json::from_str(text)?;
        Self::new(raw.alphas)
    }
}

fn best_alpha(alphas: &[AlphaVector], b: &Belief) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, a) in alphas.iter().enumerate() {
        let v = a.value(b);
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

/// Action of the maximizing alpha at `b`.
pub fn alpha_policy_action(alphas: &AlphaSet, b: &Belief) -> Action {
    alphas.alphas[alphas.best(b).0].action
}

/// One alpha per action holding that action's Q-values. Illegal pairs take
/// the NoOp Q-value.
pub fn qmdp_alphas(vf: &ValueFunction, mdp: &Mdp) -> AlphaSet {
    let alphas = Action::ALL
        .iter()
        .map(|&a| AlphaVector {
            values: (0..mdp.num_states())
                .map(|s| if mdp.is_legal(s, a.index()) { vf.q[s][a.index()] } else { vf.q[s][0] })
                .collect(),
            action: a,
        })
        .collect();
    AlphaSet { alphas }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSet {
    pub points: Vec<Belief>,
}

impl BeliefSet {
    /// The nominal start belief of every battery-health cohort.
    pub fn cohorts() -> Self {
        Self { points: BatteryHealth::ALL.iter().map(|&bh| initial_belief(bh)).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Actions legal in every state the belief supports.
pub fn legal_at_belief(mdp: &Mdp, b: &Belief) -> Vec<usize> {
    (0..NUM_ACTIONS).filter(|&a| b.support().all(|(s, _)| mdp.is_legal(s, a))).collect()
}

/// False when every supported state admits only NoOp, as absorbing
/// states do.
fn has_decision(mdp: &Mdp, b: &Belief) -> bool {
    b.support().any(|(s, _)| mdp.legal_actions(s).nth(1).is_some())
}

/// Distances below this count as an already covered belief.
const COVERED: f64 = 1e-9;

fn min_distance(points: &[Belief], b: &Belief) -> f64 {
    points.iter().map(|p| p.l1_distance(b)).fold(f64::INFINITY, f64::min)
}

/// Farthest sampled successor of `b`, one sampled step per legal action.
fn farthest_successor<R: Rng>(
    b: &Belief,
    points: &[Belief],
    mdp: &Mdp,
    obs: &ObservationModel,
    rng: &mut R,
) -> Option<(f64, Belief)> {
    let support: Vec<(usize, f64)> = b.support().collect();
    let mut best: Option<(f64, Belief)> = None;
    for a in legal_at_belief(mdp, b) {
        let s = sample_categorical(rng, &support);
        let next = sample_categorical(rng, mdp.transitions.successors(a, s));
        let o = sample_categorical(rng, obs.support(a, next));
        let Ok(succ) = belief_update(b, a, o, &mdp.transitions, obs) else { continue };
        if !has_decision(mdp, &succ) {
            continue;
        }
        let d = min_distance(points, &succ);
        if best.as_ref().is_none_or(|(bd, _)| d > *bd) {
            best = Some((d, succ));
        }
    }
    best
}

fn expand_round(
    bs: &BeliefSet,
    mdp: &Mdp,
    obs: &ObservationModel,
    seed: u64,
    round: u64,
    max_new: usize,
) -> BeliefSet {
    let mut candidates: Vec<(f64, usize, Belief)> = bs
        .points
        .par_iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let mut rng = stream(seed, (round << 32) | i as u64);
            farthest_successor(b, &bs.points, mdp, obs, &mut rng).map(|(d, succ)| (d, i, succ))
        })
        .collect();
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut points = bs.points.clone();
    let mut added = 0;
    for (_, _, succ) in candidates {
        if added == max_new {
            break;
        }
        if min_distance(&points, &succ) > COVERED {
            points.push(succ);
            added += 1;
        }
    }
    BeliefSet { points }
}

/// For every point, simulates one step per legal action with a sampled
/// observation and proposes the successor farthest in L1 from the current
/// set. The `max_new` farthest proposals are added; proposals already in the
/// set are dropped.
pub fn expand_beliefs(
    bs: &BeliefSet,
    mdp: &Mdp,
    obs: &ObservationModel,
    seed: u64,
    max_new: usize,
) -> BeliefSet {
    expand_round(bs, mdp, obs, seed, 0, max_new)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbviConfig {
    pub discount: f64,
    pub num_expansions: usize,
    pub backups_per_expansion: usize,
    pub seed: u64,
    /// Points added per expansion, farthest proposals first.
    pub points_per_expansion: usize,
    /// Seed the set with the delta belief of every state that has a choice.
    pub corners: bool,
    /// After the scheduled sweeps, backups continue until no belief point
    /// gains more than this.
    pub tolerance: f64,
    /// Hard cap on the total number of sweeps.
    pub max_sweeps: usize,
}

impl Default for PbviConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            num_expansions: 30,
            backups_per_expansion: 20,
            seed: 0,
            points_per_expansion: 10,
            corners: true,
            tolerance: 1e-9,
            max_sweeps: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbviStats {
    pub sweeps: usize,
    pub belief_points: usize,
    pub unpruned_alphas: usize,
    pub alphas: usize,
    /// Largest gain at any point in the last sweep.
    pub final_improvement: f64,
    /// Smallest gain at any point over all sweeps.
    pub min_improvement: f64,
}

#[derive(Debug, Clone)]
pub struct PbviSolution {
    pub alphas: AlphaSet,
    pub unpruned: AlphaSet,
    pub beliefs: BeliefSet,
    pub stats: PbviStats,
}

/// Values of the open-loop policies that repeat one action forever. Each is
/// a lower bound on the optimal value.
fn blind_alphas(mdp: &Mdp, discount: f64) -> Vec<AlphaVector> {
    let n = mdp.num_states();
    Action::ALL
        .iter()
        .map(|&act| {
            let a = act.index();
            let mut v = vec![0.0; n];
            loop {
                let next: Vec<f64> = (0..n)
                    .map(|s| {
                        let future: f64 =
                            mdp.transitions.successors(a, s).iter().map(|&(j, p)| p * v[j]).sum();
                        mdp.rewards.get(s, a) + discount * future
                    })
                    .collect();
                let delta = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                v = next;
                if delta <= 1e-13 {
                    break;
                }
            }
            AlphaVector { values: v, action: act }
        })
        .collect()
}

/// Point-based Bellman backup of `alphas` at `b`: the best legal action's
/// backed-up alpha and its value at `b`.
fn backup(
    b: &Belief,
    alphas: &[AlphaVector],
    mdp: &Mdp,
    obs: &ObservationModel,
    discount: f64,
) -> (AlphaVector, f64) {
    let n = mdp.num_states();
    let n_obs = obs.num_observations();
    let mut pred = vec![0.0; n];
    let mut acc = vec![0.0; n_obs];
    let mut best: Option<(AlphaVector, f64)> = None;
    for a in legal_at_belief(mdp, b) {
        mdp.transitions.predict(a, b.as_slice(), &mut pred);
        let support: Vec<(usize, f64)> =
            pred.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(j, p)| (j, *p)).collect();
        let mut seen = vec![false; n_obs];
        for &(j, _) in &support {
            for &(o, _) in obs.support(a, j) {
                seen[o] = true;
            }
        }
        // per observation, the alpha maximizing the unnormalized successor value
        let mut best_o = vec![(0usize, f64::NEG_INFINITY); n_obs];
        let mut fallback = (0usize, f64::NEG_INFINITY);
        for (k, alpha) in alphas.iter().enumerate() {
            acc.iter_mut().for_each(|x| *x = 0.0);
            let mut total = 0.0;
            for &(j, p) in &support {
                let v = p * alpha.values[j];
                total += v;
                for &(o, z) in obs.support(a, j) {
                    acc[o] += z * v;
                }
            }
            for o in 0..n_obs {
                if seen[o] && acc[o] > best_o[o].1 {
                    best_o[o] = (k, acc[o]);
                }
            }
            if total > fallback.1 {
                fallback = (k, total);
            }
        }
        let choice: Vec<usize> =
            (0..n_obs).map(|o| if seen[o] { best_o[o].0 } else { fallback.0 }).collect();
        let w: Vec<f64> = (0..n)
            .map(|j| obs.support(a, j).iter().map(|&(o, z)| z * alphas[choice[o]].values[j]).sum())
            .collect();
        let values: Vec<f64> = (0..n)
            .map(|s| {
                let future: f64 = mdp.transitions.successors(a, s).iter().map(|&(j, p)| p * w[j]).sum();
                mdp.rewards.get(s, a) + discount * future
            })
            .collect();
        let alpha = AlphaVector { values, action: Action::ALL[a] };
        let v = alpha.value(b);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((alpha, v));
        }
    }
    best.expect("NoOp is always legal")
}

fn dedup(alphas: Vec<AlphaVector>) -> Vec<AlphaVector> {
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(alphas.len());
    for a in alphas {
        if seen.insert(a.key(), ()).is_none() {
            out.push(a);
        }
    }
    out
}

/// One synchronous sweep. Each point keeps its previous best alpha when the
/// backup would not raise its value, so point values never decrease.
fn sweep(
    alphas: &[AlphaVector],
    points: &[Belief],
    mdp: &Mdp,
    obs: &ObservationModel,
    discount: f64,
) -> Vec<AlphaVector> {
    let chosen: Vec<AlphaVector> = points
        .par_iter()
        .map(|b| {
            let (cand, v) = backup(b, alphas, mdp, obs, discount);
            let (k, old) = best_alpha(alphas, b);
            if v > old {
                cand
            } else {
                alphas[k].clone()
            }
        })
        .collect();
    dedup(chosen)
}

/// Removes alphas that are pointwise dominated, then alphas that are not
/// the (lowest-index) maximizer at any belief point. Values and actions at
/// the points are unchanged.
pub fn prune(alphas: &AlphaSet, points: &[Belief]) -> AlphaSet {
    let all = &alphas.alphas;
    let dominated = |i: usize| {
        all.iter().enumerate().any(|(j, other)| {
            j != i
                && other.values.iter().zip(&all[i].values).all(|(x, y)| x >= y)
                && (j < i || other.values != all[i].values)
        })
    };
    let kept: Vec<AlphaVector> =
        (0..all.len()).filter(|&i| !dominated(i)).map(|i| all[i].clone()).collect();
    let mut used = vec![false; kept.len()];
    for b in points {
        used[best_alpha(&kept, b).0] = true;
    }
    let alphas = kept.into_iter().zip(used).filter(|x| x.1).map(|x| x.0).collect();
    AlphaSet { alphas }
}

/// Point-based value iteration.
///
/// Starts from the repeat-one-action lower bounds, alternates seeded
/// belief expansion with synchronous backups, then keeps sweeping until the
/// point values settle.
pub fn pbvi_solve(
    mdp: &Mdp,
    obs: &ObservationModel,
    initial: &BeliefSet,
    config: &PbviConfig,
) -> Result<PbviSolution> {
    if initial.is_empty() {
        return Err(CmaError::EmptyBeliefSet);
    }
    if !(config.discount > 0.0 && config.discount < 1.0) {
        return Err(CmaError::Domain(format!("discount {} outside (0,1)", config.discount)));
    }
    if obs.num_states() != mdp.num_states() {
        return Err(CmaError::Inconsistent(format!(
            "observation model has {} states, transition model {}",
            obs.num_states(),
            mdp.num_states()
        )));
    }
    let mut alphas = blind_alphas(mdp, config.discount);
    let mut frontier = initial.clone();
    // corners are backed up but never expanded
    let corners: Vec<Belief> = if config.corners {
        (0..mdp.num_states())
            .map(|s| Belief::delta(mdp.num_states(), s))
            .filter(|c| has_decision(mdp, c) && min_distance(&initial.points, c) > COVERED)
            .collect()
    } else {
        vec![]
    };
    let mut beliefs = BeliefSet { points: corners.iter().chain(&frontier.points).cloned().collect() };
    let mut values: Vec<f64> = beliefs.points.iter().map(|b| best_alpha(&alphas, b).1).collect();
    let mut sweeps = 0;
    let mut min_improvement = f64::INFINITY;
    let mut last = f64::INFINITY;

    let run_sweep = |alphas: &mut Vec<AlphaVector>, beliefs: &BeliefSet, values: &mut Vec<f64>| {
        *alphas = sweep(alphas, &beliefs.points, mdp, obs, config.discount);
        let fresh: Vec<f64> = beliefs.points.par_iter().map(|b| best_alpha(alphas, b).1).collect();
        let gains = fresh.iter().zip(values.iter()).map(|(x, y)| x - y);
        let (lo, hi) = gains.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));
        *values = fresh;
        (lo, hi)
    };

    for round in 0..=config.num_expansions {
        if round > 0 {
            frontier =
                expand_round(&frontier, mdp, obs, config.seed, round as u64, config.points_per_expansion);
            beliefs.points.extend(frontier.points[beliefs.len() - corners.len()..].iter().cloned());
            values.extend(beliefs.points[values.len()..].iter().map(|b| best_alpha(&alphas, b).1));
        }
        for _ in 0..config.backups_per_expansion {
            if sweeps >= config.max_sweeps {
                break;
            }
            let (lo, hi) = run_sweep(&mut alphas, &beliefs, &mut values);
            min_improvement = min_improvement.min(lo);
            last = hi;
            sweeps += 1;
        }
    }
    while sweeps < config.max_sweeps && last > config.tolerance {
        let (lo, hi) = run_sweep(&mut alphas, &beliefs, &mut values);
        min_improvement = min_improvement.min(lo);
        last = hi;
        sweeps += 1;
    }

    let unpruned = AlphaSet::new(alphas)?;
    let pruned = prune(&unpruned, &beliefs.points);
    let stats = PbviStats {
        sweeps,
        belief_points: beliefs.len(),
        unpruned_alphas: unpruned.len(),
        alphas: pruned.len(),
        final_improvement: last,
        min_improvement,
    };
    Ok(PbviSolution { alphas: pruned, unpruned, beliefs, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, SolverConfig};
    use crate::model::{RewardModel, TransitionModel};
    use crate::pomdp::build_observation_model;
    use rand::Rng;

    /// Hidden side 0 or 1 plus an absorbing state 2. Actions 0 and 3 listen
    /// (cost 1, 85% accurate); 1 opens side 0, 2 opens side 1.
    fn listen_open(accuracy: f64) -> (Mdp, ObservationModel) {
        let n = 3;
        let mut t = vec![0.0; NUM_ACTIONS * n * n];
        let mut z = vec![0.0; NUM_ACTIONS * n * 2];
        for a in 0..NUM_ACTIONS {
            for s in 0..n {
                let listen = a == 0 || a == 3 || s == 2;
                let next = if listen { s } else { 2 };
                t[(a * n + s) * n + next] = 1.0;
                let row = &mut z[(a * n + s) * 2..(a * n + s) * 2 + 2];
                if (a == 0 || a == 3) && s < 2 {
                    row[s] = accuracy;
                    row[1 - s] = 1.0 - accuracy;
                } else {
                    row.fill(0.5);
                }
            }
        }
        let r = vec![[-1.0, 10.0, -100.0, -1.0], [-1.0, -100.0, 10.0, -1.0], [0.0; NUM_ACTIONS]];
        let legal = vec![[true; NUM_ACTIONS], [true; NUM_ACTIONS], [true, false, false, false]];
        let mdp = Mdp::new(TransitionModel::from_dense(n, t), RewardModel::from_table(r), legal).unwrap();
        (mdp, ObservationModel::from_dense(n, 2, z).unwrap())
    }

    fn uniform_hidden() -> BeliefSet {
        BeliefSet { points: vec![Belief::new(vec![0.5, 0.5, 0.0]).unwrap()] }
    }

    fn config() -> PbviConfig {
        PbviConfig { discount: 0.95, num_expansions: 10, points_per_expansion: 4, ..PbviConfig::default() }
    }

    fn random_belief<R: Rng>(rng: &mut R, n: usize) -> Belief {
        Belief::normalized((0..n).map(|_| rng.random::<f64>().powi(3)).collect()).unwrap()
    }

    fn alpha(values: &[f64], action: Action) -> AlphaVector {
        AlphaVector { values: values.to_vec(), action }
    }

    #[test]
    fn alpha_set_rejects_bad_input() {
        assert!(AlphaSet::new(vec![]).is_err());
        assert!(AlphaSet::new(vec![alpha(&[1.0, f64::NAN], Action::NoOp)]).is_err());
        assert!(AlphaSet::new(vec![alpha(&[1.0], Action::NoOp), alpha(&[1.0, 2.0], Action::NoOp)]).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let set = AlphaSet::new(vec![
            alpha(&[1.0, 0.0], Action::LandPract),
            alpha(&[0.0, 1.0], Action::Terminate),
            alpha(&[1.0, 0.0], Action::NoOp),
        ])
        .unwrap();
        let mid = Belief::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(set.best(&mid), (0, 0.5));
        assert_eq!(alpha_policy_action(&set, &mid), Action::LandPract);
        assert_eq!(alpha_policy_action(&set, &Belief::delta(2, 1)), Action::Terminate);
        assert_eq!(AlphaSet::from_json(&set.to_json().unwrap()).unwrap(), set);
    }

    #[test]
    fn prune_drops_dominated_duplicate_and_unused() {
        let set = AlphaSet::new(vec![
            alpha(&[2.0, 0.0], Action::NoOp),
            alpha(&[1.0, -1.0], Action::NoOp),
            alpha(&[0.0, 2.0], Action::LandAsap),
            alpha(&[0.0, 2.0], Action::LandAsap),
            alpha(&[1.2, 1.2], Action::Terminate),
        ])
        .unwrap();
        let corners = [Belief::delta(2, 0), Belief::delta(2, 1)];
        let pruned = prune(&set, &corners);
        assert_eq!(pruned.alphas(), &[alpha(&[2.0, 0.0], Action::NoOp), alpha(&[0.0, 2.0], Action::LandAsap)]);
        let mid = [Belief::new(vec![0.5, 0.5]).unwrap()];
        assert_eq!(prune(&set, &mid).alphas(), &[alpha(&[1.2, 1.2], Action::Terminate)]);
    }

    #[test]
    fn qmdp_matches_mdp_at_deltas() {
        let mdp = Mdp::default_model();
        let vf = value_iteration(&mdp, &SolverConfig::default()).unwrap();
        let q = qmdp_alphas(&vf, &mdp);
        assert_eq!(q.len(), NUM_ACTIONS);
        for s in 0..mdp.num_states() {
            let e = Belief::delta(mdp.num_states(), s);
            assert!((q.value(&e) - vf.v[s]).abs() < 1e-9, "state {s}");
            assert_eq!(alpha_policy_action(&q, &e), vf.action(s), "state {s}");
        }
    }

    #[test]
    fn expansion_is_seeded_and_bounded() {
        let mdp = Mdp::default_model();
        let obs = build_observation_model(0.8).unwrap();
        let a = expand_beliefs(&BeliefSet::cohorts(), &mdp, &obs, 7, 2);
        assert_eq!(a, expand_beliefs(&BeliefSet::cohorts(), &mdp, &obs, 7, 2));
        assert!(a.len() <= 5 && a.len() > 3);
        assert_eq!(a.points[..3], BeliefSet::cohorts().points[..]);
        for (i, x) in a.points.iter().enumerate() {
            for y in &a.points[..i] {
                assert!(x.l1_distance(y) > COVERED);
            }
        }
    }

    #[test]
    fn perfect_sensing_expands_to_a_delta() {
        let (mdp, obs) = listen_open(1.0);
        let grown = expand_beliefs(&uniform_hidden(), &mdp, &obs, 0, 1);
        assert_eq!(grown.len(), 2);
        assert!(grown.points[1] == Belief::delta(3, 0) || grown.points[1] == Belief::delta(3, 1));
        let full = BeliefSet { points: vec![uniform_hidden().points[0].clone(), Belief::delta(3, 0), Belief::delta(3, 1)] };
        assert_eq!(expand_beliefs(&full, &mdp, &obs, 0, 5), full);
    }

    #[test]
    fn toy_solution_is_sound() {
        let (mdp, obs) = listen_open(0.85);
        let sol = pbvi_solve(&mdp, &obs, &uniform_hidden(), &config()).unwrap();
        let vf = value_iteration(&mdp, &SolverConfig::with_discount(0.95)).unwrap();
        assert!((sol.alphas.value(&Belief::delta(3, 0)) - 10.0).abs() < 1e-9);
        assert_eq!(alpha_policy_action(&sol.alphas, &Belief::delta(3, 1)), Action::LandAsap);
        let start = &uniform_hidden().points[0];
        assert!(matches!(alpha_policy_action(&sol.alphas, start), Action::NoOp | Action::LandPract));
        let v0 = sol.alphas.value(start);
        assert!(v0 > -10.0 && v0 < 10.0, "{v0}");
        assert!(sol.stats.min_improvement >= 0.0);
        assert!(sol.stats.final_improvement <= config().tolerance);
        for b in &sol.beliefs.points {
            assert!((sol.alphas.value(b) - sol.unpruned.value(b)).abs() <= 1e-12);
        }
        let mut rng = stream(3, 0);
        for _ in 0..500 {
            let b = random_belief(&mut rng, 3);
            let upper = b.dot(&vf.v);
            assert!(sol.alphas.value(&b) <= upper + 1e-9);
            assert!(sol.unpruned.value(&b) <= upper + 1e-9);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let (mdp, obs) = listen_open(0.7);
        let a = pbvi_solve(&mdp, &obs, &uniform_hidden(), &config()).unwrap();
        let b = pbvi_solve(&mdp, &obs, &uniform_hidden(), &config()).unwrap();
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.beliefs, b.beliefs);
    }

    #[test]
    fn solve_rejects_bad_input() {
        let (mdp, obs) = listen_open(0.85);
        let empty = BeliefSet { points: vec![] };
        assert!(matches!(pbvi_solve(&mdp, &obs, &empty, &config()), Err(CmaError::EmptyBeliefSet)));
        let undiscounted = PbviConfig { discount: 1.0, ..config() };
        assert!(pbvi_solve(&mdp, &obs, &uniform_hidden(), &undiscounted).is_err());
        let wrong = build_observation_model(0.9).unwrap();
        assert!(matches!(
            pbvi_solve(&mdp, &wrong, &uniform_hidden(), &config()),
            Err(CmaError::Inconsistent(_))
        ));
    }
}
