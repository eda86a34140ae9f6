//! Command-line arguments and the resolved, serializable run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use ssanova::design::{DEFAULT_ALPHA, DEFAULT_GCV_GAMMA};
use ssanova::effect::{format_effect_list, parse_effect_list};
use ssanova::kernels::DEFAULT_ORDER;
use ssanova::simulation::{DEFAULT_GRID_RESOLUTION, DEFAULT_REPLICATES};
use ssanova::{Effect, LambdaPolicy};

pub const SCHEMA_VERSION: &str = "1.0";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_CURVE_POINTS: usize = 25;

#[derive(Debug, Parser)]
#[command(name = "ssanova", version, about = "Effect-wise inference for smoothing spline ANOVA models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Fit a model and report lambda, GCV trace, effect norms and effect curves.
    Fit(FitArgs),
    /// Wald-type tests of individual effects and effect groups.
    Test(TestArgs),
    /// Pointwise confidence bands for effect functions.
    Ci(CiArgs),
    /// Monte-Carlo interval or test study on the benchmark model.
    Simulate(SimulateArgs),
    /// Write one benchmark dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Covariate columns, comma separated; column k is covariate k in effect lists.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    /// Effects as `;`-separated one-based index groups, e.g. "1;2;1,2". The
    /// intercept is always included. Defaults to all main effects and
    /// two-way interactions.
    #[arg(long)]
    pub effects: Option<String>,
    /// Sobolev order m.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    /// Fixed smoothing parameter; skips GCV.
    #[arg(long, conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// GCV grid, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Degrees-of-freedom inflation in GCV.
    #[arg(long, default_value_t = DEFAULT_GCV_GAMMA)]
    pub gamma: f64,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Curve samples per axis for each effect.
    #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Extra effect group to test jointly, in effect-list syntax; repeatable.
    /// The group of all effects is always reported.
    #[arg(long)]
    pub group: Vec<String>,
    /// Re-fit with only the significant effects and test again.
    #[arg(long)]
    pub refit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Frequentist,
    Bayesian,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Effects to band, in effect-list syntax; all model effects when absent.
    #[arg(long = "ci-effects")]
    pub ci_effects: Option<String>,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    pub method: MethodChoice,
    /// Evaluation points per axis.
    #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Ci,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub study: Study,
    /// Sample sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub sample_sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, env = "SSANOVA_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_GCV_GAMMA)]
    pub gamma: f64,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Target effect sizes for the test study.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.4, 0.5])]
    pub rho: Vec<f64>,
    /// Tested effects for the test study; all non-intercept effects when absent.
    #[arg(long)]
    pub targets: Option<String>,
    /// Effects receiving intervals in the interval study; all when absent.
    #[arg(long = "ci-effects")]
    pub ci_effects: Option<String>,
    /// Grid points per axis in the interval study.
    #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION)]
    pub grid: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory for records.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long = "n")]
    pub n: usize,
    #[arg(long, env = "SSANOVA_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Effect size override `EFFECT=RHO`, e.g. "1,2=0"; repeatable.
    #[arg(long = "effect-size")]
    pub effect_size: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fit,
    Test,
    Ci,
    Simulate,
    Generate,
}

/// Fully resolved configuration, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub response: Option<String>,
    pub covariates: Vec<String>,
    /// Effect list in CLI syntax, intercept implied.
    pub effects: Option<String>,
    pub order: usize,
    pub lambda: Option<LambdaPolicy>,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub grid: Option<usize>,
    pub groups: Vec<String>,
    pub refit: bool,
    pub ci_effects: Option<String>,
    pub method: Option<MethodChoice>,
    pub study: Option<Study>,
    pub sample_sizes: Vec<usize>,
    pub replicates: Option<usize>,
    pub rho: Vec<f64>,
    pub targets: Option<String>,
    pub effect_sizes: Vec<String>,
    pub rank_tolerance: Option<f64>,
}

impl RunConfig {
    fn empty(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            response: None,
            covariates: Vec::new(),
            effects: None,
            order: DEFAULT_ORDER,
            lambda: None,
            gamma: DEFAULT_GCV_GAMMA,
            alpha: None,
            out: None,
            seed: None,
            jobs: 1,
            grid: None,
            groups: Vec::new(),
            refit: false,
            ci_effects: None,
            method: None,
            study: None,
            sample_sizes: Vec::new(),
            replicates: None,
            rho: Vec::new(),
            targets: None,
            effect_sizes: Vec::new(),
            rank_tolerance: None,
        }
    }

    fn with_model(command: Command, m: &ModelArgs) -> anyhow::Result<Self> {
        let mut c = Self::empty(command);
        c.input = Some(m.input.clone());
        c.response = Some(m.response.clone());
        c.covariates = m.covariates.clone();
        let d = m.covariates.len();
        c.effects = Some(match &m.effects {
            Some(s) => normalize_effects(s)?,
            None => format_effect_list(&Effect::all_up_to(d, d.min(2))),
        });
        c.order = m.order;
        c.lambda = Some(match (m.lambda, &m.lambda_grid) {
            (Some(lambda), _) => LambdaPolicy::Fixed { lambda },
            (None, grid) => LambdaPolicy::Gcv { grid: grid.clone() },
        });
        c.gamma = m.gamma;
        c.out = m.out.clone();
        c.jobs = m.jobs;
        Ok(c)
    }

    /// Resolves parsed arguments; effect lists are normalized.
    pub fn from_cli(cli: &Cli) -> anyhow::Result<Self> {
        Ok(match &cli.command {
            Commands::Fit(a) => {
                let mut c = Self::with_model(Command::Fit, &a.model)?;
                c.grid = Some(a.grid);
                c
            }
            Commands::Test(a) => {
                let mut c = Self::with_model(Command::Test, &a.model)?;
                c.alpha = Some(a.alpha);
                c.groups = a.group.iter().map(|g| normalize_effects(g)).collect::<anyhow::Result<_>>()?;
                c.refit = a.refit;
                c.rank_tolerance = Some(ssanova::spectral::DEFAULT_RANK_TOLERANCE);
                c
            }
            Commands::Ci(a) => {
                let mut c = Self::with_model(Command::Ci, &a.model)?;
                c.alpha = Some(a.alpha);
                c.ci_effects = a.ci_effects.as_deref().map(normalize_effects_with_intercept).transpose()?;
                c.method = Some(a.method);
                c.grid = Some(a.grid);
                c.rank_tolerance = Some(ssanova::spectral::DEFAULT_RANK_TOLERANCE);
                c
            }
            Commands::Simulate(a) => {
                let mut c = Self::empty(Command::Simulate);
                c.order = ssanova::simulation::ORDER;
                c.effects = Some(format_effect_list(&ssanova::simulation::benchmark_effects()));
                c.lambda = Some(LambdaPolicy::Gcv {
                    grid: a.lambda_grid.clone(),
                });
                c.gamma = a.gamma;
                c.alpha = Some(a.alpha);
                c.out = Some(a.out.clone());
                c.seed = Some(a.seed);
                c.jobs = a.jobs;
                c.grid = Some(a.grid);
                c.study = Some(a.study);
                c.sample_sizes = a.sample_sizes.clone();
                c.replicates = Some(a.replicates);
                c.rank_tolerance = Some(ssanova::spectral::DEFAULT_RANK_TOLERANCE);
                match a.study {
                    Study::Test => {
                        c.rho = a.rho.clone();
                        c.targets = Some(match &a.targets {
                            Some(t) => normalize_effects(t)?,
                            None => format_effect_list(&ssanova::simulation::benchmark_effects()),
                        });
                    }
                    Study::Ci => {
                        c.ci_effects = a.ci_effects.as_deref().map(normalize_effects_with_intercept).transpose()?;
                    }
                }
                c
            }
            Commands::Generate(a) => {
                let mut c = Self::empty(Command::Generate);
                c.seed = Some(a.seed);
                c.out = a.out.clone();
                c.sample_sizes = vec![a.n];
                c.order = ssanova::simulation::ORDER;
                c.effect_sizes = a.effect_size.clone();
                c
            }
        })
    }

    pub fn effect_list(&self) -> anyhow::Result<Vec<Effect>> {
        Ok(parse_effect_list(self.effects.as_deref().unwrap_or(""))?)
    }
}

/// Canonical form of an effect list (sorted, intercept implicit).
pub fn normalize_effects(s: &str) -> anyhow::Result<String> {
    Ok(format_effect_list(&parse_effect_list(s)?))
}

fn is_intercept_token(p: &str) -> bool {
    matches!(p.trim(), "0" | "{}")
}

/// As [`normalize_effects`], but `0` (or `{}`) keeps the intercept.
fn normalize_effects_with_intercept(s: &str) -> anyhow::Result<String> {
    let effects = parse_selection(s)?;
    let rest = format_effect_list(&effects);
    Ok(match (effects.iter().any(Effect::is_intercept), rest.is_empty()) {
        (true, true) => "0".to_string(),
        (true, false) => format!("0;{rest}"),
        (false, _) => rest,
    })
}

/// Parses an effect list in which the intercept is selected only when
/// named as `0` or `{}`.
pub fn parse_selection(s: &str) -> anyhow::Result<Vec<Effect>> {
    let keep = s.split(';').any(is_intercept_token);
    let rest: Vec<&str> = s.split(';').filter(|p| !is_intercept_token(p)).collect();
    let mut effects = parse_effect_list(&rest.join(";"))?;
    if !keep {
        effects.retain(|e| !e.is_intercept());
    }
    Ok(effects)
}
