//! The iterative feature-space optimization loop: recursive feature
//! elimination guided by a pluggable evaluator, followed by a downstream
//! random-forest test of the best feature set found.

mod pipeline;

pub use pipeline::{downstream_test, run_pipeline};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{ForestConfig, LinearConfig, TreeConfig};
use crate::data::DEFAULT_SPLIT;
use crate::error::{EaseError, Result};
use crate::evaluator::{DEFAULT_DIM, DEFAULT_HEADS};
use crate::metrics::MetricBundle;
use crate::subspace::{FeatureScore, LossBook};
use crate::training::TrainConfig;

/// Which model scores candidate feature spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Ease,
    Linear,
    Tree,
    Forest,
}

impl EvaluatorKind {
    pub const ALL: [EvaluatorKind; 4] = [
        EvaluatorKind::Ease,
        EvaluatorKind::Linear,
        EvaluatorKind::Tree,
        EvaluatorKind::Forest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluatorKind::Ease => "ease",
            EvaluatorKind::Linear => "linear",
            EvaluatorKind::Tree => "tree",
            EvaluatorKind::Forest => "forest",
        }
    }
}

impl fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvaluatorKind {
    type Err = EaseError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            EaseError::Config(format!(
                "unknown evaluator {s:?} (expected ease, linear, tree or forest)"
            ))
        })
    }
}

/// Ablations of the attention evaluator's training procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EaseVariant {
    /// Pre-training, incremental Fisher-weighted updates, error-weighted
    /// subspaces.
    Full,
    /// No pre-training: the loop starts from a random initialization.
    NoPretrain,
    /// Every iteration retrains a freshly initialized evaluator.
    NoIncremental,
    /// Subspaces are drawn uniformly from the training rows each iteration.
    NoSubspaceOpt,
}

impl EaseVariant {
    pub const ALL: [EaseVariant; 4] = [
        EaseVariant::Full,
        EaseVariant::NoPretrain,
        EaseVariant::NoIncremental,
        EaseVariant::NoSubspaceOpt,
    ];

    /// Arm name used in ablation reports.
    pub fn arm_name(&self) -> &'static str {
        match self {
            EaseVariant::Full => "ease",
            EaseVariant::NoPretrain => "ease-pt",
            EaseVariant::NoIncremental => "ease-it",
            EaseVariant::NoSubspaceOpt => "ease-fc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// The loop stops once at most this many features remain.
    pub target_k: usize,
    pub max_iters: usize,
    pub rfe_drop_fraction: f64,
    pub evaluator: EvaluatorKind,
    pub variant: EaseVariant,
    pub train: TrainConfig,
    /// Attention width; also the number of samples per subspace.
    pub dim: usize,
    pub heads: usize,
    /// Subspaces per iteration; `None` uses `max(8, ceil(n_train / dim))`.
    pub subspace_count: Option<usize>,
    pub split: [f64; 3],
    pub forest: ForestConfig,
    pub tree: TreeConfig,
    pub linear: LinearConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_k: 1,
            max_iters: 50,
            rfe_drop_fraction: 0.1,
            evaluator: EvaluatorKind::Ease,
            variant: EaseVariant::Full,
            train: TrainConfig::default(),
            dim: DEFAULT_DIM,
            heads: DEFAULT_HEADS,
            subspace_count: None,
            split: DEFAULT_SPLIT,
            forest: ForestConfig::default(),
            tree: TreeConfig::default(),
            linear: LinearConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Checks the configuration against a dataset with `k_orig` features.
    pub fn validate(&self, k_orig: usize) -> Result<()> {
        if self.target_k < 1 || self.target_k >= k_orig {
            return Err(EaseError::Config(format!(
                "target-k must lie in [1, {}) for {k_orig} features, got {}",
                k_orig, self.target_k
            )));
        }
        if !(self.rfe_drop_fraction > 0.0 && self.rfe_drop_fraction < 1.0) {
            return Err(EaseError::Config(format!(
                "rfe drop fraction must lie in (0, 1), got {}",
                self.rfe_drop_fraction
            )));
        }
        if self.subspace_count == Some(0) {
            return Err(EaseError::Config("subspace count must be at least 1".into()));
        }
        if self.forest.n_trees == 0 {
            return Err(EaseError::Config("forest needs at least one tree".into()));
        }
        self.train.validate()
    }
}

/// One entry of the optimization history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub feature_ids: Vec<usize>,
    /// Present for the attention evaluator.
    pub train_record: Option<crate::training::TrainRecord>,
    /// Higher is better. Attention evaluator: negative mean loss; baselines:
    /// accuracy or negative mean squared error.
    pub validation_metric: f64,
    /// Wall time spent fitting the evaluator this iteration, including the
    /// Fisher estimate for incremental updates.
    pub train_time_ms: f64,
    /// Wall time of the whole iteration.
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_features: usize,
    pub task: crate::data::Task,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub dataset: DatasetSummary,
    pub config: PipelineConfig,
    /// Iteration 0 holds the original feature space and pre-training.
    pub iterations: Vec<IterationRecord>,
    pub best_iteration: usize,
    pub best_feature_ids: Vec<usize>,
    pub final_feature_ids: Vec<usize>,
    /// Random-forest metrics on the test split using the best feature set.
    pub downstream: MetricBundle,
    /// Sum of `train_time_ms` over the history.
    pub cumulative_time_ms: f64,
}

/// Mutable loop state.
#[derive(Debug, Clone, Default)]
pub struct DriverState {
    pub iteration: usize,
    pub active: Vec<usize>,
    pub losses: LossBook,
    pub history: Vec<IterationRecord>,
}

impl DriverState {
    pub fn new(k_orig: usize) -> Self {
        Self {
            active: (0..k_orig).collect(),
            ..Default::default()
        }
    }
}

/// Removes `max(1, floor(fraction * |active|))` lowest-scoring features,
/// never leaving fewer than `target_k`. Among equal scores the higher id
/// goes first. Returns the survivors in ascending id order.
pub fn rfe_step(state: &DriverState, scores: &[FeatureScore], cfg: &PipelineConfig) -> Result<Vec<usize>> {
    let active = &state.active;
    if active.len() <= cfg.target_k {
        return Err(EaseError::Contract(format!(
            "{} active features, target {}",
            active.len(),
            cfg.target_k
        )));
    }
    let mut ranked = Vec::with_capacity(active.len());
    for &f in active {
        let score = scores
            .iter()
            .find(|s| s.feature_id == f)
            .ok_or_else(|| EaseError::Contract(format!("no score for active feature {f}")))?;
        ranked.push((score.score, f));
    }
    let remove = ((cfg.rfe_drop_fraction * active.len() as f64).floor() as usize)
        .max(1)
        .min(active.len() - cfg.target_k);
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut kept: Vec<usize> = ranked[remove..].iter().map(|&(_, f)| f).collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Index of the first record with the highest validation metric.
pub fn best_iteration(history: &[IterationRecord]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, rec) in history.iter().enumerate() {
        if best.is_none_or(|b| rec.validation_metric > history[b].validation_metric) {
            best = Some(i);
        }
    }
    best
}
