//! Linear regression and multinomial logistic regression by full-batch
//! gradient descent.

use serde::{Deserialize, Serialize};

use super::{check_xy, Predictor};
use crate::data::Task;
use crate::error::{EaseError, Result};
use crate::math::{softmax_in_place, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self { epochs: 500, lr: 0.1 }
    }
}

/// `k x out` weights and `out` intercepts; `out` is 1 for regression and
/// the class count for classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Matrix,
    pub intercept: Vec<f64>,
    pub task: Task,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.rows()
    }

    fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut out = self.intercept.clone();
        for (f, &x) in row.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.weights.row(f)) {
                *o += x * w;
            }
        }
        out
    }

    /// Coefficient magnitude per feature (L2 norm across classes).
    pub fn coefficient_magnitudes(&self) -> Vec<f64> {
        (0..self.weights.rows())
            .map(|f| self.weights.row(f).iter().map(|w| w * w).sum::<f64>().sqrt())
            .collect()
    }
}

impl Predictor for LinearModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let scores = self.scores(row);
        if self.task.is_classification() {
            argmax(&scores) as f64
        } else {
            scores[0]
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradient descent on mean squared error (regression) or softmax
/// cross-entropy (classification). Weights start at zero; the regression
/// intercept starts at `mean(y)`, so a constant target is fitted exactly.
pub fn fit_linear(x: &Matrix, y: &[f64], task: Task, cfg: &LinearConfig) -> Result<LinearModel> {
    check_xy(x, y)?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(EaseError::Config(format!("learning rate {} must be positive", cfg.lr)));
    }
    let (n, k) = x.shape();
    let out = task.classes().map_or(1, |c| c.max(2));
    if let Some(c) = task.classes() {
        if let Some(&bad) = y.iter().find(|&&v| v < 0.0 || v >= c as f64 || v.fract() != 0.0) {
            return Err(EaseError::Label { label: bad, classes: c });
        }
    }
    let mut model = LinearModel {
        weights: Matrix::zeros(k, out),
        intercept: vec![0.0; out],
        task,
    };
    if !task.is_classification() {
        let mean = y.iter().sum::<f64>() / n as f64;
        model.intercept[0] = mean;
        if y.iter().all(|&v| v == y[0]) {
            return Ok(model);
        }
    }

    let mut grad_w = Matrix::zeros(k, out);
    let mut grad_b = vec![0.0; out];
    let mut residual = vec![0.0; out];
    for _ in 0..cfg.epochs {
        grad_w.as_mut_slice().fill(0.0);
        grad_b.fill(0.0);
        for r in 0..n {
            let row = x.row(r);
            let scores = model.scores(row);
            if task.is_classification() {
                residual.copy_from_slice(&scores);
                softmax_in_place(&mut residual);
                residual[y[r] as usize] -= 1.0;
            } else {
                residual[0] = 2.0 * (scores[0] - y[r]);
            }
            for (f, &xf) in row.iter().enumerate() {
                for (g, e) in grad_w.row_mut(f).iter_mut().zip(&residual) {
                    *g += xf * e;
                }
            }
            for (g, e) in grad_b.iter_mut().zip(&residual) {
                *g += e;
            }
        }
        let step = cfg.lr / n as f64;
        for (w, g) in model.weights.as_mut_slice().iter_mut().zip(grad_w.as_slice()) {
            *w -= step * g;
        }
        for (b, g) in model.intercept.iter_mut().zip(&grad_b) {
            *b -= step * g;
        }
    }
    if model.weights.is_finite() && model.intercept.iter().all(|b| b.is_finite()) {
        Ok(model)
    } else {
        Err(EaseError::Divergence {
            epoch: cfg.epochs,
            loss: f64::NAN,
        })
    }
}
