//! Command-line driver: model export and validation, solving, sweeps and
//! reports.

pub mod experiment;
pub mod report;
pub mod sweep;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cma_core::model::{defaults, validate_document, BatteryHealth};
use cma_core::policy::PolicyKind;
use cma_core::sim::Prior;

use crate::experiment::{
    alphas_file, load_model, read_asset, solve_mdp, solve_pomdp, write_atomic, ExperimentSpec,
    VALUE_FUNCTION_FILE,
};

/// Failures with a dedicated exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad model, configuration or asset contents.
    Validation(String),
    /// A required input file or result cell is absent.
    MissingAssets(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::MissingAssets(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::MissingAssets(m) => write!(f, "missing assets: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "cma", version, about = "Contingency management policy evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export or check model documents.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Solve the MDP or the POMDP and write the solution.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Simulate every (policy, p_obs, BH) cell.
    Sweep(SweepArgs),
    /// Summarize a sweep directory.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Write the default factor tables and reward weights as JSON.
    ExportDefaults {
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a model document; exits 1 on any violation.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model document; the shipped defaults when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Override the per-step spalling onset probability.
    #[arg(long)]
    pub spalling_onset: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct PbviArgs {
    /// Belief expansion rounds.
    #[arg(long)]
    pub pbvi_expansions: Option<usize>,
    /// Backup sweeps per expansion round.
    #[arg(long)]
    pub pbvi_backups: Option<usize>,
    /// Cap on the total number of backup sweeps.
    #[arg(long)]
    pub pbvi_max_sweeps: Option<usize>,
}

impl PbviArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(n) = self.pbvi_expansions {
            spec.pbvi.num_expansions = n;
        }
        if let Some(n) = self.pbvi_backups {
            spec.pbvi.backups_per_expansion = n;
        }
        if let Some(n) = self.pbvi_max_sweeps {
            spec.pbvi.max_sweeps = n;
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// Value iteration; writes the value function, Q-table and policy.
    Mdp {
        #[command(flatten)]
        model: ModelArgs,
        /// Bellman residual tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Point-based value iteration, one alpha set per observability.
    ///
    /// With a single --p-obs value, --out is the alpha-set file. With
    /// several, --out is a directory receiving the value function and one
    /// alpha set per value.
    Pomdp {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "p-obs", value_delimiter = ',', default_values_t = experiment::DEFAULT_P_OBS)]
        p_obs: Vec<f64>,
        /// Belief expansion seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        pbvi: PbviArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PriorArg {
    Known,
    Diffuse,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub spalling_onset: Option<f64>,
    /// Episodes per cell [default: 5000].
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Base seed; episode k uses stream k of this seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Observability grid [default: 1.0,0.9,0.8,0.6].
    #[arg(long = "p-obs", value_delimiter = ',')]
    pub p_obs: Option<Vec<f64>>,
    /// Battery-health cohorts [default: G,M,P].
    #[arg(long, value_delimiter = ',')]
    pub bh: Option<Vec<BatteryHealth>>,
    /// Policies [default: all five].
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<PolicyKind>>,
    /// Step cap per episode [default: 100].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Discount factor [default: 0.99].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prior for belief-tracking policies [default: known].
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[command(flatten)]
    pub pbvi: PbviArgs,
    /// Directory with pre-solved assets; solved on demand when omitted.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Results directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl SweepArgs {
    pub fn experiment(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match &self.config {
            Some(path) => serde_json::from_str(&read_asset(path)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
            None => ExperimentSpec::default(),
        };
        if self.model.is_some() {
            spec.model.clone_from(&self.model);
        }
        if self.spalling_onset.is_some() {
            spec.spalling_onset = self.spalling_onset;
        }
        if let Some(n) = self.episodes {
            spec.n_episodes = n;
        }
        if let Some(s) = self.seed {
            spec.base_seed = s;
        }
        if let Some(p) = &self.p_obs {
            spec.p_obs.clone_from(p);
        }
        if let Some(b) = &self.bh {
            spec.bh.clone_from(b);
        }
        if let Some(p) = &self.policy {
            spec.policies.clone_from(p);
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(g) = self.gamma {
            spec.discount = g;
        }
        if let Some(p) = self.prior {
            spec.prior = match p {
                PriorArg::Known => Prior::KnownBh,
                PriorArg::Diffuse => Prior::DiffuseBh,
            };
        }
        self.pbvi.apply(&mut spec);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sweep results directory.
    pub results: PathBuf,
    /// Where to write the report files; the results directory by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.downcast_ref::<CliError>().map_or(1, CliError::exit_code)
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Model(ModelCommand::ExportDefaults { out }) => {
            let json = defaults::model().to_json()?;
            match out {
                Some(path) => write_atomic(&path, json.as_bytes())?,
                None => emit(&format!("{json}\n"))?,
            }
        }
        Command::Model(ModelCommand::Validate { model }) => {
            let report = validate_document(&read_asset(&model)?);
            emit(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            if !report.is_valid() {
                return Err(CliError::Validation(format!(
                    "{}: {} violation(s)",
                    model.display(),
                    report.violations.len()
                ))
                .into());
            }
        }
        Command::Solve(SolveCommand::Mdp { model, tol, out }) => {
            let (_, mdp) = load_model(model.model.as_deref(), model.spalling_onset)?;
            let vf = solve_mdp(&mdp, model.gamma, tol)?;
            write_atomic(&out, vf.to_json()?.as_bytes())?;
            eprintln!("value iteration: {} iterations, residual {:e}", vf.iterations, vf.residual);
        }
        Command::Solve(SolveCommand::Pomdp { model, p_obs, seed, pbvi, out }) => {
            let mut spec = ExperimentSpec { p_obs, discount: model.gamma, ..Default::default() };
            spec.pbvi.seed = seed;
            pbvi.apply(&mut spec);
            spec.validate()?;
            let (_, mdp) = load_model(model.model.as_deref(), model.spalling_onset)?;
            solve_assets(&spec, &mdp, &out)?;
        }
        Command::Sweep(args) => {
            let spec = args.experiment()?;
            sweep::run_sweep(&spec, args.assets.as_deref(), &args.out)?;
        }
        Command::Report(args) => {
            let report = report::load(&args.results)?;
            emit(&report.tables())?;
            report.write(args.out.as_deref().unwrap_or(&args.results))?;
        }
    }
    Ok(())
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> std::io::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn solve_assets(spec: &ExperimentSpec, mdp: &cma_core::model::Mdp, out: &Path) -> anyhow::Result<()> {
    if let [p] = spec.p_obs[..] {
        let alphas = solve_pomdp(mdp, p, &spec.pbvi_config())?;
        eprintln!("p_obs={p}: {} alpha vectors", alphas.len());
        return write_atomic(out, alphas.to_json()?.as_bytes());
    }
    fs::create_dir_all(out)?;
    let vf = solve_mdp(mdp, spec.discount, 1e-9)?;
    write_atomic(&out.join(VALUE_FUNCTION_FILE), vf.to_json()?.as_bytes())?;
    for &p in &spec.p_obs {
        let alphas = solve_pomdp(mdp, p, &spec.pbvi_config())?;
        eprintln!("p_obs={p}: {} alpha vectors", alphas.len());
        write_atomic(&out.join(alphas_file(p)), alphas.to_json()?.as_bytes())?;
    }
    Ok(())
}
