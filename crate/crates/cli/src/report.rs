//! Report documents written by the commands, plus their aligned-text and
//! CSV summaries.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ease_core::data::TaskHint;
use ease_core::drivers::{EvaluatorKind, OptimizationReport, PipelineConfig};
use ease_core::metrics::MetricBundle;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// A dataset file and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: String,
    pub sha256: String,
}

impl DatasetRef {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex,
        })
    }
}

/// Everything needed to replay one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub dataset: DatasetRef,
    pub task: TaskHint,
    pub target_col: Option<String>,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub generated_at: String,
    pub manifest: RunManifest,
    pub report: OptimizationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One (dataset, evaluator or arm, seed) run inside a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: String,
    pub arm: String,
    pub seed: u64,
    pub manifest: RunManifest,
    pub status: CellStatus,
    pub error: Option<String>,
    pub report: Option<OptimizationReport>,
}

/// Mean and population standard deviation over the runs that produced a
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub name: String,
    pub stat: Stat,
}

/// Aggregate over seeds for one (dataset, arm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub dataset: String,
    pub arm: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub metrics: Vec<MetricStat>,
    pub cumulative_time_ms: Option<Stat>,
    /// Mean training time of iterations after the first, per run.
    pub mean_iteration_train_time_ms: Option<Stat>,
    /// Median over runs of the per-run mean iteration training time.
    pub median_iteration_train_time_ms: Option<f64>,
    /// Median epochs over all iterations t >= 2 of all runs.
    pub median_update_epochs: Option<f64>,
    pub pretrain_epochs: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub generated_at: String,
    pub tool_version: String,
    pub datasets: Vec<DatasetRef>,
    pub arms: Vec<String>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub cells: Vec<Cell>,
    pub summary: Vec<ArmSummary>,
}

/// Any document the tool writes; `kind` tags the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportDocument {
    Run(Box<RunReport>),
    Benchmark(GridReport),
    Ablation(GridReport),
}

/// Named downstream metrics, `None` where undefined.
pub fn metric_values(bundle: &MetricBundle) -> Vec<(&'static str, Option<f64>)> {
    match bundle {
        MetricBundle::Regression(m) => vec![("mae", Some(m.mae)), ("rmse", Some(m.rmse)), ("r2", m.r2)],
        MetricBundle::Classification(m) => vec![
            ("accuracy", Some(m.accuracy)),
            ("precision_macro", Some(m.precision_macro)),
            ("recall_macro", Some(m.recall_macro)),
            ("f1_macro", Some(m.f1_macro)),
            ("precision_positive", m.precision_positive),
        ],
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// Summarizes the cells sharing `dataset` and `arm`.
pub fn summarize(dataset: &str, arm: &str, cells: &[&Cell]) -> ArmSummary {
    let ok: Vec<&OptimizationReport> = cells.iter().filter_map(|c| c.report.as_ref()).collect();
    let mut metrics: Vec<MetricStat> = Vec::new();
    if let Some(first) = ok.first() {
        for (name, _) in metric_values(&first.downstream) {
            let values: Vec<f64> = ok
                .iter()
                .filter_map(|r| metric_values(&r.downstream).into_iter().find(|(n, _)| *n == name)?.1)
                .collect();
            if let Some(stat) = Stat::of(&values) {
                metrics.push(MetricStat {
                    name: name.to_string(),
                    stat,
                });
            }
        }
    }
    let per_run_iter_time: Vec<f64> = ok
        .iter()
        .filter(|r| r.iterations.len() > 1)
        .map(|r| {
            let later = &r.iterations[1..];
            later.iter().map(|i| i.train_time_ms).sum::<f64>() / later.len() as f64
        })
        .collect();
    let update_epochs: Vec<f64> = ok
        .iter()
        .flat_map(|r| r.iterations.iter().skip(2))
        .filter_map(|i| i.train_record.as_ref().map(|t| t.epochs as f64))
        .collect();
    let pretrain: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.iterations[0].train_record.as_ref().map(|t| t.epochs as f64))
        .collect();
    ArmSummary {
        dataset: dataset.to_string(),
        arm: arm.to_string(),
        n_ok: ok.len(),
        n_failed: cells.len() - ok.len(),
        metrics,
        cumulative_time_ms: Stat::of(&ok.iter().map(|r| r.cumulative_time_ms).collect::<Vec<_>>()),
        mean_iteration_train_time_ms: Stat::of(&per_run_iter_time),
        median_iteration_train_time_ms: median(per_run_iter_time),
        median_update_epochs: median(update_epochs),
        pretrain_epochs: Stat::of(&pretrain),
    }
}

/// Builds the per-(dataset, arm) summaries in grid order.
pub fn summarize_grid(datasets: &[DatasetRef], arms: &[String], cells: &[Cell]) -> Vec<ArmSummary> {
    let mut out = Vec::new();
    for d in datasets {
        for arm in arms {
            let group: Vec<&Cell> = cells.iter().filter(|c| c.dataset == d.path && &c.arm == arm).collect();
            out.push(summarize(&d.path, arm, &group));
        }
    }
    out
}

/// Renders rows as left-aligned, space-padded columns.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn fmt_stat(s: Option<&Stat>) -> String {
    s.map_or_else(|| "-".into(), |s| format!("{:.4} ± {:.4}", s.mean, s.std))
}

/// Summary rows of a document; the first row is the header.
pub fn summary_rows(doc: &ReportDocument) -> Vec<Vec<String>> {
    match doc {
        ReportDocument::Run(r) => {
            let mut rows = vec![vec![
                "iteration".to_string(),
                "n_features".into(),
                "validation_metric".into(),
                "epochs".into(),
                "train_time_ms".into(),
            ]];
            for it in &r.report.iterations {
                rows.push(vec![
                    it.iteration.to_string(),
                    it.feature_ids.len().to_string(),
                    format!("{:.6}", it.validation_metric),
                    it.train_record
                        .as_ref()
                        .map_or_else(|| "-".into(), |t| t.epochs.to_string()),
                    format!("{:.1}", it.train_time_ms),
                ]);
            }
            rows
        }
        ReportDocument::Benchmark(g) | ReportDocument::Ablation(g) => {
            let names = metric_names(g);
            let mut header = vec!["dataset".to_string(), "arm".into(), "ok".into(), "failed".into()];
            header.extend(names.iter().cloned());
            header.extend([
                "cumulative_time_ms".to_string(),
                "median_iteration_train_time_ms".into(),
                "median_update_epochs".into(),
            ]);
            let mut rows = vec![header];
            for s in &g.summary {
                let mut row = vec![
                    s.dataset.clone(),
                    s.arm.clone(),
                    s.n_ok.to_string(),
                    s.n_failed.to_string(),
                ];
                for n in &names {
                    row.push(fmt_stat(s.metrics.iter().find(|m| &m.name == n).map(|m| &m.stat)));
                }
                row.push(fmt_stat(s.cumulative_time_ms.as_ref()));
                row.push(fmt_opt(s.median_iteration_train_time_ms));
                row.push(fmt_opt(s.median_update_epochs));
                rows.push(row);
            }
            rows
        }
    }
}

fn metric_names(g: &GridReport) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for s in &g.summary {
        for m in &s.metrics {
            if !names.contains(&m.name) {
                names.push(m.name.clone());
            }
        }
    }
    names
}

/// The human-readable text summary.
pub fn render_text(doc: &ReportDocument) -> String {
    let mut out = String::new();
    match doc {
        ReportDocument::Run(r) => {
            let rep = &r.report;
            let _ = writeln!(
                out,
                "run  dataset {}  seed {}",
                r.manifest.dataset.path, r.manifest.seed
            );
            let _ = writeln!(
                out,
                "evaluator {}  features {} -> {}  best iteration {}",
                rep.config.evaluator,
                rep.dataset.n_features,
                rep.final_feature_ids.len(),
                rep.best_iteration
            );
            let names: Vec<&str> = rep
                .best_feature_ids
                .iter()
                .map(|&f| rep.dataset.feature_names[f].as_str())
                .collect();
            let _ = writeln!(out, "best features: {}", names.join(", "));
            let metrics: Vec<String> = metric_values(&rep.downstream)
                .into_iter()
                .map(|(n, v)| format!("{n} {}", fmt_opt(v)))
                .collect();
            let _ = writeln!(out, "downstream test: {}", metrics.join("  "));
            let _ = writeln!(out, "cumulative training time: {:.1} ms\n", rep.cumulative_time_ms);
        }
        ReportDocument::Benchmark(g) | ReportDocument::Ablation(g) => {
            let kind = if matches!(doc, ReportDocument::Benchmark(_)) {
                "benchmark"
            } else {
                "ablation"
            };
            let seeds: Vec<String> = g.seeds.iter().map(u64::to_string).collect();
            let _ = writeln!(
                out,
                "{kind}  seeds {}  (mean ± population std over seeds)",
                seeds.join(",")
            );
            for c in g.cells.iter().filter(|c| c.status == CellStatus::Failed) {
                let _ = writeln!(
                    out,
                    "failed: {} {} seed {}: {}",
                    c.dataset,
                    c.arm,
                    c.seed,
                    c.error.as_deref().unwrap_or("")
                );
            }
            out.push('\n');
        }
    }
    out.push_str(&align(&summary_rows(doc)));
    out
}

/// The summary table as CSV.
pub fn render_csv(doc: &ReportDocument) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in summary_rows(doc) {
        w.write_record(&row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Paths of the three files written for one document.
#[derive(Debug, Clone)]
pub struct WrittenReport {
    pub json: PathBuf,
    pub text: PathBuf,
    pub csv: PathBuf,
}

/// Writes `<out>/report-<timestamp>-<tag>.{json,txt,csv}`. A numeric suffix
/// is added rather than overwriting an existing report.
pub fn write_report(out: &Path, tag: &str, doc: &ReportDocument) -> Result<WrittenReport, CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("cannot write report in {}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
    let json = serde_json::to_string_pretty(doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    let text = render_text(doc);
    let csv = render_csv(doc)?;
    for attempt in 0.. {
        let stem = if attempt == 0 {
            format!("report-{stamp}-{tag}")
        } else {
            format!("report-{stamp}-{tag}.{attempt}")
        };
        let json_path = out.join(format!("{stem}.json"));
        match OpenOptions::new().write(true).create_new(true).open(&json_path) {
            Ok(mut f) => {
                f.write_all(json.as_bytes()).map_err(io)?;
                f.write_all(b"\n").map_err(io)?;
                let text_path = out.join(format!("{stem}.txt"));
                let csv_path = out.join(format!("{stem}.csv"));
                std::fs::write(&text_path, &text).map_err(io)?;
                std::fs::write(&csv_path, &csv).map_err(io)?;
                return Ok(WrittenReport {
                    json: json_path,
                    text: text_path,
                    csv: csv_path,
                });
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io(e)),
        }
    }
    unreachable!("unbounded attempt counter")
}

pub(crate) fn arm_label(kind: EvaluatorKind) -> String {
    kind.as_str().to_string()
}
