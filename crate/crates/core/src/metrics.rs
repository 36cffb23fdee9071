//! Downstream test metrics: MAE/RMSE/R² and accuracy with macro-averaged
//! precision, recall and F1.

use serde::{Deserialize, Serialize};

use crate::error::{EaseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the targets are constant (R² undefined).
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    /// Precision of class 1 for binary tasks.
    pub precision_positive: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricBundle {
    Regression(RegressionMetrics),
    Classification(ClassificationMetrics),
}

impl MetricBundle {
    /// The single number used to rank runs: R² (or −RMSE when undefined)
    /// for regression, accuracy for classification.
    pub fn headline(&self) -> f64 {
        match self {
            MetricBundle::Regression(m) => m.r2.unwrap_or(-m.rmse),
            MetricBundle::Classification(m) => m.accuracy,
        }
    }
}

pub fn regression_metrics(y: &[f64], y_hat: &[f64]) -> Result<RegressionMetrics> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(EaseError::Shape(format!(
            "metric inputs have lengths {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let n = y.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (t, p) in y.iter().zip(y_hat) {
        let e = t - p;
        abs_sum += e.abs();
        sq_sum += e * e;
    }
    let mean = y.iter().sum::<f64>() / n;
    let total: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = (total > 0.0).then(|| 1.0 - sq_sum / total);
    Ok(RegressionMetrics {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        r2,
    })
}

pub fn classification_metrics(y: &[usize], y_hat: &[usize], classes: usize) -> Result<ClassificationMetrics> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(EaseError::Shape(format!(
            "metric inputs have lengths {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    if let Some(&bad) = y.iter().chain(y_hat).find(|&&c| c >= classes) {
        return Err(EaseError::Label {
            label: bad as f64,
            classes,
        });
    }
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut actual = vec![0usize; classes];
    let mut correct = 0usize;
    for (&t, &p) in y.iter().zip(y_hat) {
        actual[t] += 1;
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
            correct += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let p = ratio(tp[c], predicted[c]);
        let r = ratio(tp[c], actual[c]);
        precision_sum += p;
        recall_sum += r;
        f1_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = classes as f64;
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / y.len() as f64,
        precision_macro: precision_sum / k,
        recall_macro: recall_sum / k,
        f1_macro: f1_sum / k,
        precision_positive: (classes == 2).then(|| ratio(tp[1], predicted[1])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_regression() {
        let y = [1.0, 2.0, 4.0];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!((m.mae, m.rmse, m.r2), (0.0, 0.0, Some(1.0)));
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let y = [1.0, 2.0, 6.0];
        let m = regression_metrics(&y, &[3.0; 3]).unwrap();
        assert!(m.r2.unwrap().abs() < 1e-12);
    }

    #[test]
    fn small_regression_arithmetic() {
        let m = regression_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.r2, Some(0.0));
    }

    #[test]
    fn constant_targets_leave_r2_undefined() {
        let m = regression_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(m.r2, None);
        assert_eq!(m.mae, 1.0);
        assert!(regression_metrics(&[], &[]).is_err());
        assert!(regression_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn perfect_classification() {
        let y = [0, 1, 2, 1];
        let m = classification_metrics(&y, &y, 3).unwrap();
        assert_eq!(
            (m.accuracy, m.precision_macro, m.recall_macro, m.f1_macro),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn binary_confusion_arithmetic() {
        let m = classification_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision_positive, Some(1.0));
        // class 1 recall 0.5, class 0 precision 2/3 recall 1
        assert!((m.recall_macro - 0.75).abs() < 1e-15);
        assert!((m.precision_macro - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn never_predicted_class_contributes_zero() {
        let m = classification_metrics(&[0, 1, 2], &[0, 1, 1], 3).unwrap();
        // per-class precision: 1, 0.5, 0
        assert!((m.precision_macro - 0.5).abs() < 1e-15);
        assert!(m.f1_macro.is_finite());
        assert_eq!(m.precision_positive, None);
        assert!(classification_metrics(&[0, 3], &[0, 0], 3).is_err());
    }
}
