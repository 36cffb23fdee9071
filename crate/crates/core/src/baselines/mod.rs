//! Reference evaluators: linear/logistic regression, a CART tree and a
//! bagged random forest, plus permutation importance for scoring features
//! with any of them.

mod forest;
mod linear;
mod tree;

pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use linear::{fit_linear, LinearConfig, LinearModel};
pub use tree::{best_split, fit_tree, LeafValue, Split, TreeConfig, TreeNode};

use crate::data::Task;
use crate::error::{EaseError, Result};
use crate::math::{Matrix, RandomSource};

/// A fitted model mapping feature rows to predictions. Classification models
/// return the predicted class index as `f64`.
pub trait Predictor {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}

/// Higher is better: accuracy for classification, negative mean squared
/// error for regression.
pub fn validation_metric(y: &[f64], y_hat: &[f64], task: Task) -> f64 {
    let n = y.len().max(1) as f64;
    if task.is_classification() {
        y.iter().zip(y_hat).filter(|(a, b)| a == b).count() as f64 / n
    } else {
        -y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(EaseError::InvalidArgument(format!(
            "design matrix is {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if x.rows() != y.len() {
        return Err(EaseError::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    Ok(())
}

/// Permutation importance with three random shuffles per feature.
pub fn permutation_importance(
    model: &dyn Predictor,
    x_val: &Matrix,
    y_val: &[f64],
    task: Task,
    rng: &mut RandomSource,
) -> Result<Vec<f64>> {
    permutation_importance_with(model, x_val, y_val, task, 3, |_, _| {
        let mut perm: Vec<usize> = (0..x_val.rows()).collect();
        rng.shuffle(&mut perm);
        perm
    })
}

/// Mean metric drop over `repeats` permutations of each column in turn;
/// `permutation(feature, repeat)` supplies the row order used.
pub fn permutation_importance_with(
    model: &dyn Predictor,
    x_val: &Matrix,
    y_val: &[f64],
    task: Task,
    repeats: usize,
    mut permutation: impl FnMut(usize, usize) -> Vec<usize>,
) -> Result<Vec<f64>> {
    check_xy(x_val, y_val)?;
    if repeats == 0 {
        return Err(EaseError::InvalidArgument("at least one shuffle is required".into()));
    }
    let base = validation_metric(y_val, &model.predict(x_val), task);
    let mut shuffled = x_val.clone();
    let mut scores = Vec::with_capacity(x_val.cols());
    for f in 0..x_val.cols() {
        let mut drop = 0.0;
        for rep in 0..repeats {
            let perm = permutation(f, rep);
            if perm.len() != x_val.rows() {
                return Err(EaseError::Shape(format!(
                    "permutation of length {} for {} rows",
                    perm.len(),
                    x_val.rows()
                )));
            }
            for (r, &src) in perm.iter().enumerate() {
                shuffled[(r, f)] = x_val[(src, f)];
            }
            drop += base - validation_metric(y_val, &model.predict(&shuffled), task);
        }
        for r in 0..x_val.rows() {
            shuffled[(r, f)] = x_val[(r, f)];
        }
        scores.push(drop / repeats as f64);
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::planted_regression;

    struct FirstColumn;

    impl Predictor for FirstColumn {
        fn predict_row(&self, row: &[f64]) -> f64 {
            row[0]
        }
    }

    #[test]
    fn identity_permutation_scores_zero() {
        let x = Matrix::from_fn(20, 3, |r, c| (r * 3 + c) as f64);
        let y: Vec<f64> = (0..20).map(|r| (r * 3) as f64).collect();
        let scores =
            permutation_importance_with(&FirstColumn, &x, &y, Task::Regression, 3, |_, _| (0..20).collect()).unwrap();
        assert_eq!(scores, vec![0.0; 3]);
    }

    #[test]
    fn ignored_column_scores_zero() {
        let x = Matrix::from_fn(50, 2, |r, c| ((r * 7 + c * 13) % 11) as f64);
        let y: Vec<f64> = (0..50).map(|r| x[(r, 0)]).collect();
        let scores = permutation_importance(&FirstColumn, &x, &y, Task::Regression, &mut RandomSource::new(0)).unwrap();
        assert_eq!(scores[1], 0.0);
        assert!(scores[0] > 0.0);
    }

    #[test]
    fn planted_target_ranks_its_feature_first() {
        let ds = planted_regression(300, 4, 0.0, 1);
        let rows: Vec<usize> = (0..300).collect();
        let feats: Vec<usize> = (0..4).collect();
        let x = ds.matrix(&rows, &feats);
        let y: Vec<f64> = (0..300).map(|r| x[(r, 0)]).collect();
        let forest = fit_forest(&x, &y, Task::Regression, &ForestConfig::default(), 5).unwrap();
        let scores = permutation_importance(&forest, &x, &y, Task::Regression, &mut RandomSource::new(2)).unwrap();
        for f in 1..4 {
            assert!(scores[0] > scores[f], "{scores:?}");
        }
    }

    #[test]
    fn metric_definitions() {
        assert_eq!(
            validation_metric(&[0.0, 1.0], &[0.0, 0.0], Task::Classification { classes: 2 }),
            0.5
        );
        assert_eq!(validation_metric(&[0.0, 2.0], &[1.0, 1.0], Task::Regression), -1.0);
    }
}
