//! Bagged random forest over CART trees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::argmax;
use super::tree::{check_labels, grow, TreeConfig, TreeNode};
use super::{check_xy, Predictor};
use crate::data::Task;
use crate::error::{EaseError, Result};
use crate::math::{Matrix, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    pub bootstrap: bool,
    /// Features examined per split; `None` uses `ceil(sqrt(k))` for
    /// classification and `ceil(k / 3)` for regression.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeConfig::default(),
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub tree_seeds: Vec<u64>,
    pub max_features: usize,
    pub n_features: usize,
    pub task: Task,
}

impl Predictor for ForestModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self.task.classes() {
            Some(c) => {
                let mut votes = vec![0.0; c.max(1)];
                for t in &self.trees {
                    votes[t.predict_row(row) as usize] += 1.0;
                }
                argmax(&votes) as f64
            }
            None => self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64,
        }
    }
}

fn default_max_features(k: usize, task: Task) -> usize {
    let m = if task.is_classification() {
        (k as f64).sqrt().ceil() as usize
    } else {
        k.div_ceil(3)
    };
    m.clamp(1, k)
}

/// Trees are grown independently (in parallel when threads are available)
/// from seeds derived from `seed` and the tree index, so the fitted forest
/// does not depend on scheduling.
pub fn fit_forest(x: &Matrix, y: &[f64], task: Task, cfg: &ForestConfig, seed: u64) -> Result<ForestModel> {
    check_xy(x, y)?;
    check_labels(y, task)?;
    if cfg.n_trees == 0 {
        return Err(EaseError::Config("a forest needs at least one tree".into()));
    }
    let k = x.cols();
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| default_max_features(k, task))
        .clamp(1, k);
    let tree_seeds: Vec<u64> = (0..cfg.n_trees as u64)
        .map(|i| seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .collect();
    let n = x.rows();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = RandomSource::new(s);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.index(n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, &rows, task, &cfg.tree, Some(max_features), &mut rng, 0)
        })
        .collect();
    Ok(ForestModel {
        trees,
        tree_seeds,
        max_features,
        n_features: k,
        task,
    })
}
