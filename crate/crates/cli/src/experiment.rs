//! Experiment grids, model loading and solved assets.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cma_core::mdp::{value_iteration, SolverConfig, ValueFunction};
use cma_core::model::{defaults, validate_model, BatteryHealth, Mdp, ModelSpec};
use cma_core::policy::PolicyKind;
use cma_core::pomdp::{build_observation_model, pbvi_solve, AlphaSet, BeliefSet, PbviConfig};
use cma_core::sim::Prior;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_P_OBS: [f64; 4] = [1.0, 0.9, 0.8, 0.6];
pub const VALUE_FUNCTION_FILE: &str = "value_function.json";

/// Everything a sweep needs. Loadable from a JSON config file; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Model document; `None` means the shipped defaults.
    pub model: Option<PathBuf>,
    pub spalling_onset: Option<f64>,
    pub p_obs: Vec<f64>,
    pub bh: Vec<BatteryHealth>,
    pub policies: Vec<PolicyKind>,
    pub n_episodes: usize,
    pub base_seed: u64,
    pub horizon: usize,
    pub discount: f64,
    pub prior: Prior,
    pub pbvi: PbviConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            model: None,
            spalling_onset: None,
            p_obs: DEFAULT_P_OBS.to_vec(),
            bh: BatteryHealth::ALL.to_vec(),
            policies: PolicyKind::ALL.to_vec(),
            n_episodes: 5000,
            base_seed: 0,
            horizon: 100,
            discount: 0.99,
            prior: Prior::KnownBh,
            pbvi: PbviConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.p_obs.is_empty() || self.bh.is_empty() || self.policies.is_empty() {
            return bad("p_obs, bh and policy grids must be non-empty".into());
        }
        if let Some(p) = self.p_obs.iter().find(|p| !(0.5..=1.0).contains(*p)) {
            return bad(format!("p_obs value {p} outside [0.5, 1]"));
        }
        if self.n_episodes == 0 || self.horizon == 0 {
            return bad("episodes and horizon must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("gamma {} outside [0, 1)", self.discount));
        }
        Ok(())
    }

    /// Grid cells in a fixed order: BH, then policy, then observability.
    /// Observation-independent policies get one cell per BH.
    pub fn cells(&self) -> Vec<Cell> {
        let mut policies = self.policies.clone();
        policies.sort();
        policies.dedup();
        let mut out = Vec::new();
        for &bh in &self.bh {
            for &policy in &policies {
                if policy.depends_on_observations() {
                    out.extend(self.p_obs.iter().map(|&p| Cell { policy, p_obs: Some(p), bh }));
                } else {
                    out.push(Cell { policy, p_obs: None, bh });
                }
            }
        }
        out
    }

    pub fn pbvi_config(&self) -> PbviConfig {
        PbviConfig { discount: self.discount, ..self.pbvi }
    }
}

/// One (policy, observability, battery health) result cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub policy: PolicyKind,
    pub p_obs: Option<f64>,
    pub bh: BatteryHealth,
}

impl Cell {
    /// File stem under `cells/`.
    pub fn name(&self) -> String {
        match self.p_obs {
            Some(p) => format!("{}_{}_{}", self.policy, p_label(p), self.bh),
            None => format!("{}_{}", self.policy, self.bh),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.p_obs {
            Some(p) => write!(f, "{} p_obs={p} bh={}", self.policy, self.bh),
            None => write!(f, "{} bh={}", self.policy, self.bh),
        }
    }
}

pub fn p_label(p: f64) -> String {
    format!("p{p:.2}")
}

pub fn alphas_file(p: f64) -> String {
    format!("alphas_{}.json", p_label(p))
}

/// Reads and checks a model document, or the defaults when `path` is `None`.
pub fn load_model(path: Option<&Path>, spalling_onset: Option<f64>) -> Result<(ModelSpec, Mdp), CliError> {
    let mut spec = match path {
        None => defaults::model(),
        Some(p) => {
            let text = read_asset(p)?;
            ModelSpec::from_json(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
    };
    if let Some(q) = spalling_onset {
        spec = spec.with_spalling_onset(q).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let mdp = Mdp::from_spec(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let report = validate_model(&mdp);
    if !report.is_valid() {
        let json = serde_json::to_string(&report.violations).unwrap_or_default();
        return Err(CliError::Validation(format!("model violates table invariants: {json}")));
    }
    Ok((spec, mdp))
}

pub fn read_asset(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::MissingAssets(format!("{}: {e}", path.display())))
}

pub fn solve_mdp(mdp: &Mdp, discount: f64, tolerance: f64) -> anyhow::Result<ValueFunction> {
    let config = SolverConfig { bellman_tolerance: tolerance, ..SolverConfig::with_discount(discount) };
    Ok(value_iteration(mdp, &config)?)
}

pub fn solve_pomdp(mdp: &Mdp, p_obs: f64, config: &PbviConfig) -> anyhow::Result<AlphaSet> {
    let obs = build_observation_model(p_obs)?;
    Ok(pbvi_solve(mdp, &obs, &BeliefSet::cohorts(), config)?.alphas)
}

pub fn load_value_function(path: &Path) -> Result<ValueFunction, CliError> {
    ValueFunction::from_json(&read_asset(path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_alphas(path: &Path) -> Result<AlphaSet, CliError> {
    AlphaSet::from_json(&read_asset(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes through a temporary sibling so readers never see partial files.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
