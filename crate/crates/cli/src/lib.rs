//! The `ease` command-line tool: single pipeline runs, evaluator
//! benchmarks and training ablations, each written as a JSON report with
//! text and CSV summaries.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

pub mod args;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;
use ease_core::data::{load_csv, CsvOptions, Dataset};
use ease_core::drivers::{run_pipeline, EaseVariant, PipelineConfig};
use ease_core::EaseError;
use rayon::prelude::*;
use thiserror::Error;

pub use args::{AblateArgs, BenchmarkArgs, Cli, Command, RunArgs, Settings};
use report::{
    arm_label, summarize_grid, write_report, Cell, CellStatus, DatasetRef, GridReport, ReportDocument, RunManifest,
    RunReport, WrittenReport,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<EaseError> for CliError {
    fn from(e: EaseError) -> Self {
        match e {
            EaseError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub const TOOL_VERSION: &str = concat!("ease ", env!("CARGO_PKG_VERSION"));

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(written) => {
            if let Ok(text) = std::fs::read_to_string(&written.text) {
                print!("{text}");
            }
            println!("report: {}", written.json.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path, settings: &Settings) -> Result<Dataset, CliError> {
    let opts = CsvOptions {
        task: settings.task,
        target_col: settings.target_col.clone(),
    };
    Ok(load_csv(path, &opts)?)
}

fn manifest(settings: &Settings, dataset: &DatasetRef, config: PipelineConfig) -> RunManifest {
    RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        seed: config.seed,
        dataset: dataset.clone(),
        task: settings.task,
        target_col: settings.target_col.clone(),
        config,
    }
}

fn generated_at() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `ease run`: one pipeline, one report.
pub fn cmd_run(args: &RunArgs) -> Result<WrittenReport, CliError> {
    let settings = args.settings()?;
    let path = &settings.datasets[0];
    let dataset_ref = DatasetRef::read(path)?;
    let dataset = load(path, &settings)?;
    let config = PipelineConfig {
        evaluator: settings.evaluators[0],
        seed: settings.seeds[0],
        ..settings.pipeline.clone()
    };
    config.validate(dataset.n_features())?;
    let report = run_pipeline(&dataset, &config)?;
    let doc = ReportDocument::Run(Box::new(RunReport {
        generated_at: generated_at(),
        manifest: manifest(&settings, &dataset_ref, config.clone()),
        report,
    }));
    write_report(&settings.out, &config.seed.to_string(), &doc)
}

/// One unit of grid work.
struct CellSpec<'a> {
    dataset: &'a DatasetRef,
    loaded: &'a Result<Dataset, String>,
    arm: String,
    config: PipelineConfig,
}

fn run_cells(settings: &Settings, specs: Vec<CellSpec<'_>>) -> Result<Vec<Cell>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| {
        specs
            .into_par_iter()
            .map(|spec| {
                let outcome = match spec.loaded {
                    Ok(ds) => run_pipeline(ds, &spec.config).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                let (status, error, report) = match outcome {
                    Ok(r) => (CellStatus::Ok, None, Some(r)),
                    Err(e) => (CellStatus::Failed, Some(e), None),
                };
                Cell {
                    dataset: spec.dataset.path.clone(),
                    arm: spec.arm,
                    seed: spec.config.seed,
                    manifest: manifest(settings, spec.dataset, spec.config),
                    status,
                    error,
                    report,
                }
            })
            .collect()
    });
    Ok(cells)
}

/// Each dataset's hash and its parsed contents or load error.
type Loaded = (Vec<DatasetRef>, Vec<Result<Dataset, String>>);

fn load_all(settings: &Settings) -> Result<Loaded, CliError> {
    let mut refs = Vec::new();
    let mut loaded = Vec::new();
    for path in &settings.datasets {
        refs.push(DatasetRef::read(path)?);
        loaded.push(load(path, settings).map_err(|e| e.to_string()));
    }
    Ok((refs, loaded))
}

fn finish(settings: &Settings, doc: ReportDocument, tag: &str) -> Result<WrittenReport, CliError> {
    let written = write_report(&settings.out, tag, &doc)?;
    let (ReportDocument::Benchmark(g) | ReportDocument::Ablation(g)) = &doc else {
        return Ok(written);
    };
    if g.cells.iter().all(|c| c.status == CellStatus::Failed) {
        return Err(CliError::Runtime(format!(
            "every cell failed (report kept at {}): {}",
            written.json.display(),
            g.cells[0].error.as_deref().unwrap_or("")
        )));
    }
    Ok(written)
}

/// `ease benchmark`: every dataset × evaluator × seed. A failed cell is
/// recorded in the report and does not stop the grid.
pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<WrittenReport, CliError> {
    let settings = args.settings()?;
    let (refs, loaded) = load_all(&settings)?;
    let mut specs = Vec::new();
    for (d, ds) in refs.iter().zip(&loaded) {
        for &evaluator in &settings.evaluators {
            for &seed in &settings.seeds {
                specs.push(CellSpec {
                    dataset: d,
                    loaded: ds,
                    arm: arm_label(evaluator),
                    config: PipelineConfig {
                        evaluator,
                        seed,
                        ..settings.pipeline.clone()
                    },
                });
            }
        }
    }
    let cells = run_cells(&settings, specs)?;
    let arms: Vec<String> = settings.evaluators.iter().map(|&e| arm_label(e)).collect();
    let doc = ReportDocument::Benchmark(GridReport {
        generated_at: generated_at(),
        tool_version: TOOL_VERSION.to_string(),
        summary: summarize_grid(&refs, &arms, &cells),
        datasets: refs,
        arms,
        seeds: settings.seeds.clone(),
        jobs: settings.jobs,
        cells,
    });
    finish(&settings, doc, "benchmark")
}

/// `ease ablate`: the four training arms of the attention evaluator over
/// seeds.
pub fn cmd_ablate(args: &AblateArgs) -> Result<WrittenReport, CliError> {
    let settings = args.settings()?;
    let (refs, loaded) = load_all(&settings)?;
    let mut specs = Vec::new();
    for variant in EaseVariant::ALL {
        for &seed in &settings.seeds {
            specs.push(CellSpec {
                dataset: &refs[0],
                loaded: &loaded[0],
                arm: variant.arm_name().to_string(),
                config: PipelineConfig {
                    variant,
                    seed,
                    ..settings.pipeline.clone()
                },
            });
        }
    }
    let cells = run_cells(&settings, specs)?;
    let arms: Vec<String> = EaseVariant::ALL.iter().map(|v| v.arm_name().to_string()).collect();
    let doc = ReportDocument::Ablation(GridReport {
        generated_at: generated_at(),
        tool_version: TOOL_VERSION.to_string(),
        summary: summarize_grid(&refs, &arms, &cells),
        datasets: refs,
        arms,
        seeds: settings.seeds.clone(),
        jobs: settings.jobs,
        cells,
    });
    finish(&settings, doc, "ablation")
}
