//! Command-line flags and their resolution against the optional config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ease_core::baselines::ForestConfig;
use ease_core::data::TaskHint;
use ease_core::drivers::{EvaluatorKind, PipelineConfig};

use crate::config::{load_config, FileConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ease", version, about = "Evaluator-guided feature space optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization pipeline and write its report.
    Run(RunArgs),
    /// Compare evaluators over datasets and seeds.
    Benchmark(BenchmarkArgs),
    /// Run the four training ablation arms over seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Auto,
    Classification,
    Regression,
}

impl From<TaskArg> for TaskHint {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Auto => TaskHint::Auto,
            TaskArg::Classification => TaskHint::Classification,
            TaskArg::Regression => TaskHint::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvaluatorArg {
    Ease,
    Linear,
    Tree,
    Forest,
}

impl From<EvaluatorArg> for EvaluatorKind {
    fn from(e: EvaluatorArg) -> Self {
        match e {
            EvaluatorArg::Ease => EvaluatorKind::Ease,
            EvaluatorArg::Linear => EvaluatorKind::Linear,
            EvaluatorArg::Tree => EvaluatorKind::Tree,
            EvaluatorArg::Forest => EvaluatorKind::Forest,
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Stop once at most this many features remain.
    #[arg(long)]
    pub target_k: Option<usize>,
    /// Target column name (defaults to the last column).
    #[arg(long)]
    pub target_col: Option<String>,
    /// TOML file whose keys mirror these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Drift penalty strength for incremental updates.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub heads: Option<usize>,
    /// Attention width, also the rows per subspace.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Fraction of active features removed per iteration.
    #[arg(long)]
    pub drop_fraction: Option<f64>,
    /// Trees in the random forest (downstream test and forest evaluator).
    #[arg(long)]
    pub trees: Option<usize>,
    /// Subspaces per iteration.
    #[arg(long)]
    pub subspaces: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Dataset CSV; repeat for several.
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub evaluators: Vec<EvaluatorArg>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Cells run concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, visible_alias = "seed", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Everything a command needs after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub datasets: Vec<PathBuf>,
    pub task: TaskHint,
    pub target_col: Option<String>,
    pub evaluators: Vec<EvaluatorKind>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub out: PathBuf,
    /// Template; `seed` and `evaluator` are filled per cell.
    pub pipeline: PipelineConfig,
}

fn parse_task(s: &str) -> Result<TaskHint, CliError> {
    match s {
        "auto" => Ok(TaskHint::Auto),
        "classification" => Ok(TaskHint::Classification),
        "regression" => Ok(TaskHint::Regression),
        other => Err(CliError::Usage(format!(
            "unknown task {other:?} (expected auto, classification or regression)"
        ))),
    }
}

fn parse_evaluator(s: &str) -> Result<EvaluatorKind, CliError> {
    s.parse()
        .map_err(|e: ease_core::EaseError| CliError::Usage(e.to_string()))
}

fn missing(flag: &str) -> CliError {
    CliError::Usage(format!(
        "missing required flag --{flag} (or `{flag}` in the config file)"
    ))
}

/// Values of one command after reading its flags.
pub struct Raw<'a> {
    pub common: &'a CommonArgs,
    pub data: Vec<PathBuf>,
    pub evaluators: Vec<EvaluatorKind>,
    pub seeds: Vec<u64>,
    pub jobs: Option<usize>,
}

pub fn resolve(raw: Raw<'_>) -> Result<Settings, CliError> {
    let c = raw.common;
    let file = match &c.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };

    let datasets = if raw.data.is_empty() {
        file.data.clone().map(|d| d.into_vec()).unwrap_or_default()
    } else {
        raw.data
    };
    if datasets.is_empty() {
        return Err(missing("data"));
    }
    let task = match (c.task, &file.task) {
        (Some(t), _) => t.into(),
        (None, Some(t)) => parse_task(t)?,
        (None, None) => return Err(missing("task")),
    };
    let target_k = c.target_k.or(file.target_k).ok_or_else(|| missing("target-k"))?;

    let evaluators = if !raw.evaluators.is_empty() {
        raw.evaluators
    } else if let Some(list) = &file.evaluators {
        list.iter().map(|s| parse_evaluator(s)).collect::<Result<_, _>>()?
    } else if let Some(one) = &file.evaluator {
        vec![parse_evaluator(one)?]
    } else {
        Vec::new()
    };
    let seeds = if !raw.seeds.is_empty() {
        raw.seeds
    } else if let Some(list) = &file.seeds {
        list.clone()
    } else {
        file.seed.into_iter().collect()
    };
    let jobs = raw.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }

    let mut pipeline = PipelineConfig {
        target_k,
        ..Default::default()
    };
    if let Some(v) = c.max_iters.or(file.max_iters) {
        pipeline.max_iters = v;
    }
    if let Some(v) = c.lambda.or(file.lambda) {
        pipeline.train.lambda = v;
    }
    if let Some(v) = c.heads.or(file.heads) {
        pipeline.heads = v;
    }
    if let Some(v) = c.dim.or(file.dim) {
        pipeline.dim = v;
    }
    if let Some(v) = c.drop_fraction.or(file.drop_fraction) {
        pipeline.rfe_drop_fraction = v;
    }
    if let Some(v) = c.trees.or(file.trees) {
        pipeline.forest = ForestConfig {
            n_trees: v,
            ..pipeline.forest
        };
    }
    pipeline.subspace_count = c.subspaces.or(file.subspaces);
    pipeline.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    ease_core::evaluator::EvaluatorConfig::new(pipeline.dim, pipeline.heads, 1, ease_core::data::Task::Regression)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    Ok(Settings {
        datasets,
        task,
        target_col: c.target_col.clone().or(file.target_col),
        evaluators,
        seeds,
        jobs,
        out: c.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("reports")),
        pipeline,
    })
}

impl RunArgs {
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = resolve(Raw {
            common: &self.common,
            data: self.data.clone().into_iter().collect(),
            evaluators: self.evaluator.into_iter().map(Into::into).collect(),
            seeds: self.seed.into_iter().collect(),
            jobs: None,
        })?;
        if s.datasets.len() != 1 {
            return Err(CliError::Usage("run takes exactly one dataset".into()));
        }
        if s.evaluators.len() > 1 {
            return Err(CliError::Usage("run takes one evaluator".into()));
        }
        if s.evaluators.is_empty() {
            s.evaluators.push(EvaluatorKind::Ease);
        }
        s.seeds.truncate(1);
        if s.seeds.is_empty() {
            s.seeds.push(0);
        }
        Ok(s)
    }
}

impl BenchmarkArgs {
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = resolve(Raw {
            common: &self.common,
            data: self.data.clone(),
            evaluators: self.evaluators.iter().copied().map(Into::into).collect(),
            seeds: self.seeds.clone(),
            jobs: self.jobs,
        })?;
        if s.evaluators.is_empty() {
            s.evaluators = EvaluatorKind::ALL.to_vec();
        }
        if s.seeds.is_empty() {
            return Err(missing("seeds"));
        }
        Ok(s)
    }
}

impl AblateArgs {
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = resolve(Raw {
            common: &self.common,
            data: self.data.clone().into_iter().collect(),
            evaluators: Vec::new(),
            seeds: self.seeds.clone(),
            jobs: self.jobs,
        })?;
        if s.datasets.len() != 1 {
            return Err(CliError::Usage("ablate takes exactly one dataset".into()));
        }
        if s.seeds.is_empty() {
            return Err(missing("seeds"));
        }
        s.evaluators = vec![EvaluatorKind::Ease];
        Ok(s)
    }
}
