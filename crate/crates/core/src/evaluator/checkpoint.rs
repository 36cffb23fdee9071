//! JSON parameter checkpoints.
//!
//! ```json
//! {
//!   "config": {"dim": 32, "heads": 16, "k_orig": 8, "task": {"kind": "regression"}},
//!   "tensors": [{"name": "w_q", "shape": [32, 32], "data": [...]}, ...]
//! }
//! ```
//!
//! Tensors appear in flat-vector order: `w_q`, `w_k`, `w_v`, then
//! `head{h}.w_q`, `head{h}.w_k`, `head{h}.w_v` for every head, then `w_o`,
//! `w_fc` (`2 k_orig x out_dim`) and `b_fc` (`1 x out_dim`). Data is row-major.

use serde::{Deserialize, Serialize};

use super::{EvaluatorConfig, EvaluatorParams};
use crate::error::{EaseError, Result};
use crate::math::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub config: EvaluatorConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(config: &EvaluatorConfig, params: &EvaluatorParams) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, m)| NamedTensor {
                name,
                shape: vec![m.rows(), m.cols()],
                data: m.as_slice().to_vec(),
            })
            .collect();
        Self {
            config: *config,
            tensors,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    /// Parses and fully validates a checkpoint document.
    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| EaseError::Checkpoint(e.to_string()))?;
        ckpt.to_params()?;
        Ok(ckpt)
    }

    /// Rebuilds the parameters, checking names, shapes and values against
    /// the embedded configuration.
    pub fn to_params(&self) -> Result<EvaluatorParams> {
        let cfg = &self.config;
        cfg.validate()
            .map_err(|e| EaseError::Checkpoint(format!("config: {e}")))?;
        let count = cfg.heads.checked_mul(3).and_then(|n| n.checked_add(6));
        if count != Some(self.tensors.len()) {
            return Err(EaseError::Checkpoint(format!(
                "expected 3 * {} + 6 tensors, found {}",
                cfg.heads,
                self.tensors.len()
            )));
        }
        let expected =
            expected_layout(cfg).ok_or_else(|| EaseError::Checkpoint("configuration dimensions overflow".into()))?;
        let mut matrices = Vec::with_capacity(expected.len());
        for ((name, rows, cols), t) in expected.into_iter().zip(&self.tensors) {
            if t.name != name {
                return Err(EaseError::Checkpoint(format!(
                    "expected tensor {name:?}, found {:?}",
                    t.name
                )));
            }
            if t.shape != [rows, cols] {
                return Err(EaseError::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected [{rows}, {cols}]",
                    t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(EaseError::Checkpoint(format!("tensor {name} has non-finite values")));
            }
            let m = Matrix::from_vec(rows, cols, t.data.clone())
                .map_err(|e| EaseError::Checkpoint(format!("tensor {name}: {e}")))?;
            matrices.push(m);
        }
        let mut it = matrices.into_iter();
        let mut next = || it.next().expect("layout length checked");
        let w_q = next();
        let w_k = next();
        let w_v = next();
        let heads = (0..cfg.heads)
            .map(|_| super::HeadWeights {
                query: next(),
                key: next(),
                value: next(),
            })
            .collect();
        Ok(EvaluatorParams {
            w_q,
            w_k,
            w_v,
            heads,
            w_o: next(),
            w_fc: next(),
            b_fc: next(),
        })
    }
}

/// Names and shapes in flat order, or `None` if a size overflows.
fn expected_layout(cfg: &EvaluatorConfig) -> Option<Vec<(String, usize, usize)>> {
    let d = cfg.dim;
    let dh = cfg.head_dim();
    d.checked_mul(d)?;
    cfg.k_orig.checked_mul(2)?.checked_mul(cfg.out_dim())?;
    let mut out = vec![
        ("w_q".to_string(), d, d),
        ("w_k".to_string(), d, d),
        ("w_v".to_string(), d, d),
    ];
    for h in 0..cfg.heads {
        out.push((format!("head{h}.w_q"), d, dh));
        out.push((format!("head{h}.w_k"), d, dh));
        out.push((format!("head{h}.w_v"), d, dh));
    }
    out.push(("w_o".to_string(), d, d));
    out.push(("w_fc".to_string(), 2 * cfg.k_orig, cfg.out_dim()));
    out.push(("b_fc".to_string(), 1, cfg.out_dim()));
    Some(out)
}
