//! Pre-training, diagonal Fisher estimation and Fisher-weighted incremental
//! fitting of the evaluator, with a step-decay learning rate and early
//! stopping on the epoch loss.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EaseError, Result};
use crate::evaluator::{
    evaluate_metric, log_likelihood_grad, loss_and_gradient, EvaluatorConfig, EvaluatorParams, SubspaceBatch,
};
use crate::math::{adam_step, AdamState, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub pretrain_epoch_cap: usize,
    pub incremental_epoch_cap: usize,
    pub patience: usize,
    pub initial_lr: f64,
    /// Multiplicative decay applied every `decay_interval` epochs.
    pub decay: f64,
    pub decay_interval: usize,
    /// Strength of the Fisher-weighted drift penalty.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epoch_cap: 50,
            incremental_epoch_cap: 200,
            patience: 10,
            initial_lr: 0.001,
            decay: 0.9,
            decay_interval: 30,
            lambda: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_epoch_cap == 0 || self.incremental_epoch_cap == 0 {
            return Err(EaseError::Config("epoch caps must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(EaseError::Config("patience must be at least 1".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(EaseError::Config(format!(
                "learning rate {} must be positive",
                self.initial_lr
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(EaseError::Config(format!("decay {} must lie in (0, 1]", self.decay)));
        }
        if self.decay_interval == 0 {
            return Err(EaseError::Config("decay interval must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(EaseError::Config(format!(
                "lambda {} must be non-negative",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `l0 * p^floor(epoch / u)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let steps = (epoch / cfg.decay_interval) as i32;
    cfg.initial_lr * cfg.decay.powi(steps)
}

/// True once the best loss so far is at least `patience` epochs old.
pub fn early_stop(history: &[f64], patience: usize) -> bool {
    let Some(best) = history
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &l)| match best {
            Some((_, b)) if l >= b => best,
            _ => Some((i, l)),
        })
    else {
        return false;
    };
    history.len() - 1 - best.0 >= patience
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Cap,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: usize,
    /// Objective per epoch (data loss plus drift penalty when present).
    pub losses: Vec<f64>,
    /// Data loss per epoch.
    pub data_losses: Vec<f64>,
    /// Held-out loss after each epoch; empty when training without one.
    #[serde(default)]
    pub holdout_losses: Vec<f64>,
    pub duration_ms: f64,
    pub stop_reason: StopReason,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: EvaluatorParams,
    pub record: TrainRecord,
    /// `(global sample id, loss)` for every valid row seen in the final epoch.
    pub sample_losses: Vec<(usize, f64)>,
}

/// Per-parameter importance from squared log-likelihood gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherDiagonal {
    pub values: Vec<f64>,
}

/// Averages, over the batches, the elementwise square of each batch's
/// summed log-likelihood gradient.
pub fn fisher(params: &EvaluatorParams, batches: &[SubspaceBatch], cfg: &EvaluatorConfig) -> Result<FisherDiagonal> {
    if batches.is_empty() {
        return Err(EaseError::InvalidArgument(
            "Fisher estimate needs at least one batch".into(),
        ));
    }
    let mut values = vec![0.0; params.len()];
    for batch in batches {
        let g = log_likelihood_grad(batch, params, cfg)?;
        for (v, gi) in values.iter_mut().zip(g) {
            *v += gi * gi;
        }
    }
    let q = batches.len() as f64;
    values.iter_mut().for_each(|v| *v /= q);
    Ok(FisherDiagonal { values })
}

fn check_lengths(theta: &[f64], theta_prev: &[f64], importance: &FisherDiagonal) -> Result<()> {
    if theta.len() != theta_prev.len() || theta.len() != importance.values.len() {
        return Err(EaseError::Shape(format!(
            "drift penalty over {} params, {} anchors, {} Fisher entries",
            theta.len(),
            theta_prev.len(),
            importance.values.len()
        )));
    }
    Ok(())
}

/// `lambda / 2 * sum_j G_j (theta_j - theta_prev_j)^2`.
pub fn ewc_penalty(theta: &[f64], theta_prev: &[f64], importance: &FisherDiagonal, lambda: f64) -> Result<f64> {
    check_lengths(theta, theta_prev, importance)?;
    let sum: f64 = theta
        .iter()
        .zip(theta_prev)
        .zip(&importance.values)
        .map(|((t, p), g)| g * (t - p) * (t - p))
        .sum();
    Ok(0.5 * lambda * sum)
}

/// Gradient of [`ewc_penalty`] with respect to `theta`.
pub fn ewc_penalty_grad(
    theta: &[f64],
    theta_prev: &[f64],
    importance: &FisherDiagonal,
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lengths(theta, theta_prev, importance)?;
    Ok(theta
        .iter()
        .zip(theta_prev)
        .zip(&importance.values)
        .map(|((t, p), g)| lambda * g * (t - p))
        .collect())
}

/// Held-out rows whose mean loss, measured after every epoch, drives early
/// stopping in place of the training objective.
#[derive(Debug, Clone, Copy)]
pub struct Holdout<'a> {
    pub space: &'a Dataset,
    pub rows: &'a [usize],
    pub features: &'a [usize],
}

impl Holdout<'_> {
    pub fn loss(&self, params: &EvaluatorParams, cfg: &EvaluatorConfig) -> Result<f64> {
        Ok(-evaluate_metric(params, cfg, self.space, self.rows, self.features)?)
    }
}

/// Drift anchor for incremental fitting.
#[derive(Debug, Clone, Copy)]
pub struct EwcAnchor<'a> {
    pub theta_prev: &'a [f64],
    pub importance: &'a FisherDiagonal,
    pub lambda: f64,
}

/// Epoch loop shared by every training mode: batches are visited in a fresh
/// random order each epoch, one Adam step per batch, the learning rate
/// schedule restarting at epoch 0. Early stopping watches the holdout loss
/// when one is given and the epoch objective otherwise.
#[allow(clippy::too_many_arguments)]
pub fn train_epochs(
    params: EvaluatorParams,
    batches: &[SubspaceBatch],
    epoch_cap: usize,
    anchor: Option<EwcAnchor<'_>>,
    holdout: Option<&Holdout<'_>>,
    tcfg: &TrainConfig,
    ecfg: &EvaluatorConfig,
    rng: &mut RandomSource,
) -> Result<FitOutcome> {
    tcfg.validate()?;
    if batches.is_empty() {
        return Err(EaseError::InvalidArgument("training needs at least one batch".into()));
    }
    if epoch_cap == 0 {
        return Err(EaseError::InvalidArgument("epoch cap must be at least 1".into()));
    }
    let start = Instant::now();
    let mut params = params;
    let mut flat = params.to_flat();
    if let Some(a) = &anchor {
        check_lengths(&flat, a.theta_prev, a.importance)?;
    }
    let mut adam = AdamState::new(flat.len());
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut losses = Vec::new();
    let mut data_losses = Vec::new();
    let mut holdout_losses = Vec::new();
    let mut sample_losses = Vec::new();
    let mut stop_reason = StopReason::Cap;

    for epoch in 0..epoch_cap {
        rng.shuffle(&mut order);
        sample_losses.clear();
        let lr = lr_at(epoch, tcfg);
        let mut objective_sum = 0.0;
        let mut data_sum = 0.0;
        for &b in &order {
            let batch = &batches[b];
            let (loss, mut grad) = loss_and_gradient(batch, &params, ecfg).map_err(|e| match e {
                EaseError::InvalidInput(_) => EaseError::Divergence { epoch, loss: f64::NAN },
                other => other,
            })?;
            let mut objective = loss.mean;
            if let Some(a) = &anchor {
                objective += ewc_penalty(&flat, a.theta_prev, a.importance, a.lambda)?;
                for (((g, t), p), w) in grad.iter_mut().zip(&flat).zip(a.theta_prev).zip(&a.importance.values) {
                    *g += a.lambda * w * (t - p);
                }
            }
            if !objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(EaseError::Divergence { epoch, loss: objective });
            }
            adam_step(&mut flat, &grad, &mut adam, lr)?;
            params.assign_flat(&flat)?;
            objective_sum += objective;
            data_sum += loss.mean;
            sample_losses.extend(batch.sample_ids.iter().copied().zip(loss.per_sample));
        }
        let q = batches.len() as f64;
        losses.push(objective_sum / q);
        data_losses.push(data_sum / q);
        let watched = match holdout {
            Some(h) => {
                let l = h.loss(&params, ecfg)?;
                if !l.is_finite() {
                    return Err(EaseError::Divergence { epoch, loss: l });
                }
                holdout_losses.push(l);
                &holdout_losses
            }
            None => &losses,
        };
        if early_stop(watched, tcfg.patience) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    Ok(FitOutcome {
        params,
        record: TrainRecord {
            epochs: losses.len(),
            losses,
            data_losses,
            holdout_losses,
            duration_ms: start.elapsed().as_secs_f64() * 1e3,
            stop_reason,
        },
        sample_losses,
    })
}

/// Fits the evaluator on the pre-training subspaces.
pub fn pretrain(
    params: EvaluatorParams,
    batches: &[SubspaceBatch],
    holdout: Option<&Holdout<'_>>,
    tcfg: &TrainConfig,
    ecfg: &EvaluatorConfig,
    rng: &mut RandomSource,
) -> Result<FitOutcome> {
    train_epochs(params, batches, tcfg.pretrain_epoch_cap, None, holdout, tcfg, ecfg, rng)
}

/// Refits `previous` on the current subspaces while penalizing drift of
/// parameters that mattered on the previous ones.
pub fn incremental_fit(
    previous: &EvaluatorParams,
    batches: &[SubspaceBatch],
    importance: &FisherDiagonal,
    holdout: Option<&Holdout<'_>>,
    tcfg: &TrainConfig,
    ecfg: &EvaluatorConfig,
    rng: &mut RandomSource,
) -> Result<FitOutcome> {
    let theta_prev = previous.to_flat();
    let anchor = EwcAnchor {
        theta_prev: &theta_prev,
        importance,
        lambda: tcfg.lambda,
    };
    train_epochs(
        previous.clone(),
        batches,
        tcfg.incremental_epoch_cap,
        Some(anchor),
        holdout,
        tcfg,
        ecfg,
        rng,
    )
}
