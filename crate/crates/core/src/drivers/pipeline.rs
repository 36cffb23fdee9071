use std::time::Instant;

use super::{
    best_iteration, rfe_step, DatasetSummary, DriverState, EaseVariant, EvaluatorKind, IterationRecord,
    OptimizationReport, PipelineConfig,
};
use crate::baselines::{
    fit_forest, fit_linear, fit_tree, permutation_importance, validation_metric, ForestConfig, Predictor,
};
use crate::data::{standardize_split, standardize_targets, Dataset, SplitSpec};
use crate::error::{EaseError, Result};
use crate::evaluator::{evaluate_metric, EvaluatorConfig, EvaluatorParams};
use crate::math::RandomSource;
use crate::metrics::{classification_metrics, regression_metrics, MetricBundle};
use crate::subspace::{
    build_subspaces, default_subspace_count, error_distribution, feature_scores, random_subspaces, weighted_sample,
    FeatureScore, SampleIndexSet,
};
use crate::training::{fisher, incremental_fit, pretrain, train_epochs, Holdout, StopReason, TrainRecord};

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the full optimization loop on `dataset` (raw, unstandardized) and
/// returns the report. The loop ends when `target_k` features remain or
/// after `max_iters` iterations.
pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig) -> Result<OptimizationReport> {
    cfg.validate(dataset.n_features())?;
    let (space, split, _) = standardize_split(dataset, cfg.split, cfg.seed)?;
    let mut state = DriverState::new(space.n_features());
    match cfg.evaluator {
        EvaluatorKind::Ease => run_ease(&space, &split, cfg, &mut state)?,
        kind => run_baseline(&space, &split, cfg, kind, &mut state)?,
    }

    let best =
        best_iteration(&state.history).ok_or_else(|| EaseError::Contract("empty optimization history".into()))?;
    let best_feature_ids = state.history[best].feature_ids.clone();
    let downstream = downstream_test(&best_feature_ids, &space, &split, &cfg.forest, cfg.seed)?;
    Ok(OptimizationReport {
        dataset: DatasetSummary {
            n_samples: space.n_samples(),
            n_features: space.n_features(),
            task: space.task(),
            feature_names: space.feature_names().to_vec(),
            target_name: space.target_name().to_string(),
            n_train: split.train.len(),
            n_validation: split.validation.len(),
            n_test: split.test.len(),
        },
        config: cfg.clone(),
        cumulative_time_ms: state.history.iter().map(|r| r.train_time_ms).sum(),
        best_iteration: best,
        best_feature_ids,
        final_feature_ids: state.active.clone(),
        downstream,
        iterations: state.history,
    })
}

fn empty_record() -> TrainRecord {
    TrainRecord {
        epochs: 0,
        losses: Vec::new(),
        data_losses: Vec::new(),
        holdout_losses: Vec::new(),
        duration_ms: 0.0,
        stop_reason: StopReason::Cap,
    }
}

fn run_ease(space: &Dataset, split: &SplitSpec, cfg: &PipelineConfig, state: &mut DriverState) -> Result<()> {
    // the evaluator sees regression targets in training-split standard units
    let (space, _, _) = standardize_targets(space, &split.train)?;
    let space = &space;
    let ecfg = EvaluatorConfig::new(cfg.dim, cfg.heads, space.n_features(), space.task())?;
    let tcfg = &cfg.train;
    let s = cfg.dim;
    let train = &split.train;
    let q = cfg
        .subspace_count
        .unwrap_or_else(|| default_subspace_count(train.len(), s));
    let mut rng = RandomSource::derived(cfg.seed, 1);

    let start = Instant::now();
    let mut params = EvaluatorParams::init(&ecfg, &mut rng);
    let mut batches = random_subspaces(space, train, s, q, &mut rng)?;
    let record = if cfg.variant == EaseVariant::NoPretrain {
        empty_record()
    } else {
        let holdout = Holdout {
            space,
            rows: &split.validation,
            features: &state.active,
        };
        let fit = pretrain(params, &batches, Some(&holdout), tcfg, &ecfg, &mut rng)?;
        params = fit.params;
        state.losses.record(fit.sample_losses);
        fit.record
    };
    let train_time_ms = elapsed_ms(start);
    state.history.push(IterationRecord {
        iteration: 0,
        feature_ids: state.active.clone(),
        train_record: Some(record),
        validation_metric: evaluate_metric(&params, &ecfg, space, &split.validation, &state.active)?,
        train_time_ms,
        duration_ms: elapsed_ms(start),
    });

    while state.iteration < cfg.max_iters && state.active.len() > cfg.target_k {
        let start = Instant::now();
        state.iteration += 1;
        let scores = feature_scores(&params, &ecfg, space, &split.validation, &state.active)?;
        let active = rfe_step(state, &scores, cfg)?;

        let pool = if cfg.variant == EaseVariant::NoSubspaceOpt {
            SampleIndexSet(train.clone())
        } else {
            let dist = error_distribution(&state.losses.losses_for(train))?;
            let picks = weighted_sample(&dist, &mut rng, train.len())?;
            SampleIndexSet(picks.0.into_iter().map(|i| train[i]).collect())
        };
        let next_batches = build_subspaces(space, &active, &pool, s, q, &mut rng)?;

        let holdout = Holdout {
            space,
            rows: &split.validation,
            features: &active,
        };
        let train_start = Instant::now();
        let fit = if cfg.variant == EaseVariant::NoIncremental {
            let fresh = EvaluatorParams::init(&ecfg, &mut rng);
            train_epochs(
                fresh,
                &next_batches,
                tcfg.incremental_epoch_cap,
                None,
                Some(&holdout),
                tcfg,
                &ecfg,
                &mut rng,
            )?
        } else {
            let importance = fisher(&params, &batches, &ecfg)?;
            incremental_fit(
                &params,
                &next_batches,
                &importance,
                Some(&holdout),
                tcfg,
                &ecfg,
                &mut rng,
            )?
        };
        let train_time_ms = elapsed_ms(train_start);
        params = fit.params;
        batches = next_batches;
        state.losses.record(fit.sample_losses);
        state.active = active;
        state.history.push(IterationRecord {
            iteration: state.iteration,
            feature_ids: state.active.clone(),
            train_record: Some(fit.record),
            validation_metric: evaluate_metric(&params, &ecfg, space, &split.validation, &state.active)?,
            train_time_ms,
            duration_ms: elapsed_ms(start),
        });
    }
    Ok(())
}

/// A fitted baseline with its validation metric and per-feature scores.
struct BaselineFit {
    metric: f64,
    scores: Vec<FeatureScore>,
    train_time_ms: f64,
}

fn fit_baseline(
    space: &Dataset,
    split: &SplitSpec,
    cfg: &PipelineConfig,
    kind: EvaluatorKind,
    features: &[usize],
    rng: &mut RandomSource,
) -> Result<BaselineFit> {
    let task = space.task();
    let x_train = space.matrix(&split.train, features);
    let y_train = space.targets_at(&split.train);
    let x_val = space.matrix(&split.validation, features);
    let y_val = space.targets_at(&split.validation);
    let start = Instant::now();
    let (model, magnitudes): (Box<dyn Predictor>, Option<Vec<f64>>) = match kind {
        EvaluatorKind::Linear => {
            let m = fit_linear(&x_train, &y_train, task, &cfg.linear)?;
            let mags = m.coefficient_magnitudes();
            (Box::new(m), Some(mags))
        }
        EvaluatorKind::Tree => (Box::new(fit_tree(&x_train, &y_train, task, &cfg.tree)?), None),
        EvaluatorKind::Forest => (
            Box::new(fit_forest(&x_train, &y_train, task, &cfg.forest, rng.next_u64())?),
            None,
        ),
        EvaluatorKind::Ease => unreachable!("attention evaluator has its own loop"),
    };
    let train_time_ms = elapsed_ms(start);
    let metric = validation_metric(&y_val, &model.predict(&x_val), task);
    let values = match magnitudes {
        Some(m) => m,
        None => permutation_importance(model.as_ref(), &x_val, &y_val, task, rng)?,
    };
    let scores = features
        .iter()
        .zip(values)
        .map(|(&feature_id, score)| FeatureScore { feature_id, score })
        .collect();
    Ok(BaselineFit {
        metric,
        scores,
        train_time_ms,
    })
}

fn run_baseline(
    space: &Dataset,
    split: &SplitSpec,
    cfg: &PipelineConfig,
    kind: EvaluatorKind,
    state: &mut DriverState,
) -> Result<()> {
    let mut rng = RandomSource::derived(cfg.seed, 1);
    let start = Instant::now();
    let mut fit = fit_baseline(space, split, cfg, kind, &state.active, &mut rng)?;
    state.history.push(IterationRecord {
        iteration: 0,
        feature_ids: state.active.clone(),
        train_record: None,
        validation_metric: fit.metric,
        train_time_ms: fit.train_time_ms,
        duration_ms: elapsed_ms(start),
    });
    while state.iteration < cfg.max_iters && state.active.len() > cfg.target_k {
        let start = Instant::now();
        state.iteration += 1;
        state.active = rfe_step(state, &fit.scores, cfg)?;
        fit = fit_baseline(space, split, cfg, kind, &state.active, &mut rng)?;
        state.history.push(IterationRecord {
            iteration: state.iteration,
            feature_ids: state.active.clone(),
            train_record: None,
            validation_metric: fit.metric,
            train_time_ms: fit.train_time_ms,
            duration_ms: elapsed_ms(start),
        });
    }
    Ok(())
}

/// Fits a fresh random forest on the training split restricted to
/// `features` and reports test-split metrics.
pub fn downstream_test(
    features: &[usize],
    space: &Dataset,
    split: &SplitSpec,
    forest: &ForestConfig,
    seed: u64,
) -> Result<MetricBundle> {
    if features.is_empty() {
        return Err(EaseError::InvalidArgument(
            "downstream test needs at least one feature".into(),
        ));
    }
    if let Some(&bad) = features.iter().find(|&&f| f >= space.n_features()) {
        return Err(EaseError::InvalidArgument(format!("feature id {bad} out of range")));
    }
    let task = space.task();
    let model = fit_forest(
        &space.matrix(&split.train, features),
        &space.targets_at(&split.train),
        task,
        forest,
        seed,
    )?;
    let predictions = model.predict(&space.matrix(&split.test, features));
    match task.classes() {
        Some(c) => {
            let y_hat: Vec<usize> = predictions.iter().map(|&p| p as usize).collect();
            Ok(MetricBundle::Classification(classification_metrics(
                &space.class_labels_at(&split.test),
                &y_hat,
                c,
            )?))
        }
        None => Ok(MetricBundle::Regression(regression_metrics(
            &space.targets_at(&split.test),
            &predictions,
        )?)),
    }
}
