//! Runs every grid cell and writes per-cell and combined results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cma_core::mdp::ValueFunction;
use cma_core::model::{BatteryHealth, Mdp};
use cma_core::policy::{Policy, PolicyKind};
use cma_core::pomdp::{build_observation_model, AlphaSet};
use cma_core::sim::{run_batch, Batch, MetricsSummary, SimConfig};
use serde::{Deserialize, Serialize};

use crate::experiment::{
    alphas_file, load_alphas, load_model, load_value_function, solve_mdp, solve_pomdp, write_atomic,
    Cell, ExperimentSpec, VALUE_FUNCTION_FILE,
};
use crate::CliError;

pub const SPEC_FILE: &str = "spec.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CELLS_DIR: &str = "cells";

/// Per-cell record written next to the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub config: SimConfig,
    pub summary: MetricsSummary,
}

#[derive(Debug, Serialize)]
struct EpisodeRow<'a> {
    episode: u64,
    seed: u64,
    policy: &'a str,
    p_obs: Option<f64>,
    bh: &'a str,
    terminal: String,
    steps: usize,
    took_contingency: bool,
    cum_reward: f64,
    disc_reward: f64,
    p_minmax: Option<f64>,
}

/// Flat row of the combined summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub p_obs: Option<f64>,
    pub bh: BatteryHealth,
    pub n: usize,
    pub completion_rate: f64,
    pub completion_sem: f64,
    pub safety_rate: f64,
    pub safety_sem: f64,
    pub failure_rate: f64,
    pub failure_sem: f64,
    pub terminated_rate: f64,
    pub horizon_rate: f64,
    pub true_success_rate: f64,
    pub true_success_sem: f64,
    pub contingency_rate: f64,
    pub mean_cum_reward: f64,
    pub cum_reward_sem: f64,
    pub mean_disc_reward: f64,
    pub disc_reward_sem: f64,
    pub mean_steps: f64,
    pub mean_p_minmax: Option<f64>,
    pub min_p_minmax: Option<f64>,
}

impl SummaryRow {
    pub fn new(cell: &Cell, s: &MetricsSummary) -> Self {
        Self {
            policy: cell.policy,
            p_obs: cell.p_obs,
            bh: cell.bh,
            n: s.n,
            completion_rate: s.completion_rate.mean,
            completion_sem: s.completion_rate.sem,
            safety_rate: s.safety_rate.mean,
            safety_sem: s.safety_rate.sem,
            failure_rate: s.failure_rate.mean,
            failure_sem: s.failure_rate.sem,
            terminated_rate: s.terminated_rate.mean,
            horizon_rate: s.horizon_rate.mean,
            true_success_rate: s.true_success_rate.mean,
            true_success_sem: s.true_success_rate.sem,
            contingency_rate: s.contingency_rate.mean,
            mean_cum_reward: s.cum_reward.mean,
            cum_reward_sem: s.cum_reward.sem,
            mean_disc_reward: s.disc_reward.mean,
            disc_reward_sem: s.disc_reward.sem,
            mean_steps: s.steps.mean,
            mean_p_minmax: s.p_minmax.map(|e| e.mean),
            min_p_minmax: s.p_minmax_min,
        }
    }
}

/// Solved policies for one sweep.
pub struct Assets {
    pub vf: ValueFunction,
    pub alphas: BTreeMap<String, AlphaSet>,
}

/// Loads assets from `dir` when given, otherwise solves them. Alpha sets are
/// only needed when the POMDP policy is in the grid.
pub fn prepare_assets(spec: &ExperimentSpec, mdp: &Mdp, dir: Option<&Path>) -> anyhow::Result<Assets> {
    let need_alphas = spec.policies.contains(&PolicyKind::Pomdp);
    let mut alphas = BTreeMap::new();
    let vf = match dir {
        Some(dir) => {
            let vf = load_value_function(&dir.join(VALUE_FUNCTION_FILE))?;
            if vf.discount != spec.discount {
                return Err(CliError::Validation(format!(
                    "value function was solved with gamma {} but the sweep uses {}",
                    vf.discount, spec.discount
                ))
                .into());
            }
            if need_alphas {
                for &p in &spec.p_obs {
                    alphas.insert(alphas_file(p), load_alphas(&dir.join(alphas_file(p)))?);
                }
            }
            vf
        }
        None => {
            let vf = solve_mdp(mdp, spec.discount, 1e-9)?;
            if need_alphas {
                for &p in &spec.p_obs {
                    eprintln!("solving POMDP at p_obs={p}");
                    alphas.insert(alphas_file(p), solve_pomdp(mdp, p, &spec.pbvi_config())?);
                }
            }
            vf
        }
    };
    Ok(Assets { vf, alphas })
}

pub fn run_cell(spec: &ExperimentSpec, mdp: &Mdp, assets: &Assets, cell: &Cell) -> anyhow::Result<Batch> {
    let p_obs = cell.p_obs.unwrap_or(1.0);
    let config = sim_config(spec, cell);
    let obs = build_observation_model(p_obs)?;
    let alphas = assets.alphas.get(&alphas_file(p_obs));
    let policy = Policy::new(cell.policy, mdp, Some(&assets.vf), Some(&obs), alphas)?;
    Ok(run_batch(&config, mdp, &obs, &policy)?)
}

pub fn sim_config(spec: &ExperimentSpec, cell: &Cell) -> SimConfig {
    SimConfig {
        horizon: spec.horizon,
        discount: spec.discount,
        n_episodes: spec.n_episodes,
        base_seed: spec.base_seed,
        p_obs: cell.p_obs.unwrap_or(1.0),
        bh: cell.bh,
        policy: cell.policy,
        prior: spec.prior,
    }
}

fn episode_csv(cell: &Cell, seed: u64, batch: &Batch) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let policy = cell.policy.name();
    let bh = cell.bh.label();
    for o in &batch.outcomes {
        w.serialize(EpisodeRow {
            episode: o.episode,
            seed,
            policy,
            p_obs: cell.p_obs,
            bh,
            terminal: o.terminal.to_string(),
            steps: o.steps,
            took_contingency: o.took_contingency,
            cum_reward: o.cum_reward,
            disc_reward: o.disc_reward,
            p_minmax: o.p_minmax,
        })?;
    }
    Ok(w.into_inner()?)
}

pub fn summary_csv(rows: &[SummaryRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub fn cell_paths(out: &Path, cell: &Cell) -> (PathBuf, PathBuf) {
    let dir = out.join(CELLS_DIR);
    let name = cell.name();
    (dir.join(format!("{name}.csv")), dir.join(format!("{name}.json")))
}

/// Runs the whole grid. Cells are written as they finish; the combined
/// summary is written last.
pub fn run_sweep(spec: &ExperimentSpec, assets_dir: Option<&Path>, out: &Path) -> anyhow::Result<Vec<SummaryRow>> {
    spec.validate()?;
    let (_, mdp) = load_model(spec.model.as_deref(), spec.spalling_onset)?;
    let assets = prepare_assets(spec, &mdp, assets_dir)?;
    if assets_dir.is_none() {
        let dir = out.join("assets");
        write_atomic(&dir.join(VALUE_FUNCTION_FILE), assets.vf.to_json()?.as_bytes())?;
        for (name, a) in &assets.alphas {
            write_atomic(&dir.join(name), a.to_json()?.as_bytes())?;
        }
    }
    write_atomic(&out.join(SPEC_FILE), serde_json::to_string_pretty(spec)?.as_bytes())?;

    let mut rows = Vec::new();
    for cell in spec.cells() {
        let batch = run_cell(spec, &mdp, &assets, &cell)?;
        let (csv_path, json_path) = cell_paths(out, &cell);
        write_atomic(&csv_path, &episode_csv(&cell, spec.base_seed, &batch)?)?;
        let result = CellResult { cell, config: sim_config(spec, &cell), summary: batch.summary };
        write_atomic(&json_path, serde_json::to_string_pretty(&result)?.as_bytes())?;
        let row = SummaryRow::new(&cell, &result.summary);
        eprintln!(
            "{cell}: completion {:.4} safety {:.4} reward {:.3}",
            row.completion_rate, row.safety_rate, row.mean_cum_reward
        );
        rows.push(row);
    }
    write_atomic(&out.join(SUMMARY_CSV), &summary_csv(&rows)?)?;
    write_atomic(&out.join(SUMMARY_JSON), serde_json::to_string_pretty(&rows)?.as_bytes())?;
    Ok(rows)
}
