//! Contextual attention evaluator.
//!
//! A subspace of `s` samples by `k` features is transposed so that every
//! feature becomes a token whose embedding is its `s = D` sample values. The
//! tokens pass through a two-stage multi-head attention block (a full `D x D`
//! projection followed by per-head `D x d_h` projections), the heads are
//! concatenated and mixed by `W_O`, and the result is transposed back and
//! concatenated with the raw subspace. A single fully connected layer then
//! predicts every sample's target.
//!
//! Since `k` changes between iterations, the FC layer has a fixed input width
//! of `2 * k_orig`: column `f` carries the context-enhanced values of global
//! feature `f` and column `k_orig + f` its raw values. Features absent from a
//! batch contribute nothing and receive zero gradient, so the flattened
//! parameter vector has the same length at every iteration.

mod checkpoint;

pub use checkpoint::{Checkpoint, NamedTensor};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{EaseError, Result};
use crate::math::{softmax_in_place, Matrix, RandomSource};

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_HEADS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    /// Embedding dimension, equal to the subspace sample count.
    pub dim: usize,
    pub heads: usize,
    /// Width of the original feature space.
    pub k_orig: usize,
    pub task: Task,
}

impl EvaluatorConfig {
    pub fn new(dim: usize, heads: usize, k_orig: usize, task: Task) -> Result<Self> {
        let cfg = Self {
            dim,
            heads,
            k_orig,
            task,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 {
            return Err(EaseError::Config("dim and heads must be positive".into()));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(EaseError::Config(format!(
                "{} heads do not divide embedding dimension {}",
                self.heads, self.dim
            )));
        }
        if self.k_orig == 0 {
            return Err(EaseError::Config("k_orig must be positive".into()));
        }
        if let Task::Classification { classes } = self.task {
            if classes < 2 {
                return Err(EaseError::Config(format!(
                    "classification needs at least 2 classes, got {classes}"
                )));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn out_dim(&self) -> usize {
        self.task.classes().unwrap_or(1)
    }

    /// Row of `W_fc` fed by column `j` of a `k`-feature batch's concat input.
    #[inline]
    fn fc_row(&self, feature_ids: &[usize], j: usize) -> usize {
        let k = feature_ids.len();
        if j < k {
            feature_ids[j]
        } else {
            self.k_orig + feature_ids[j - k]
        }
    }
}

/// Per-head projections `W^Q_h`, `W^K_h`, `W^V_h`, each `D x d_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
}

/// Every learnable weight of the evaluator. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub heads: Vec<HeadWeights>,
    pub w_o: Matrix,
    /// `2 * k_orig x out_dim`.
    pub w_fc: Matrix,
    /// `1 x out_dim`.
    pub b_fc: Matrix,
}

impl EvaluatorParams {
    pub fn zeros(cfg: &EvaluatorConfig) -> Self {
        let d = cfg.dim;
        let dh = cfg.head_dim();
        Self {
            w_q: Matrix::zeros(d, d),
            w_k: Matrix::zeros(d, d),
            w_v: Matrix::zeros(d, d),
            heads: (0..cfg.heads)
                .map(|_| HeadWeights {
                    query: Matrix::zeros(d, dh),
                    key: Matrix::zeros(d, dh),
                    value: Matrix::zeros(d, dh),
                })
                .collect(),
            w_o: Matrix::zeros(d, d),
            w_fc: Matrix::zeros(2 * cfg.k_orig, cfg.out_dim()),
            b_fc: Matrix::zeros(1, cfg.out_dim()),
        }
    }

    /// Attention weights uniform in ±sqrt(1/D), FC weights uniform in
    /// ±sqrt(1/(2 k_orig)), FC bias zero.
    pub fn init(cfg: &EvaluatorConfig, rng: &mut RandomSource) -> Self {
        let mut params = Self::zeros(cfg);
        let attn_bound = (1.0 / cfg.dim as f64).sqrt();
        let fc_bound = (1.0 / (2 * cfg.k_orig) as f64).sqrt();
        for (name, m) in params.tensors_mut() {
            let bound = match name.as_str() {
                "b_fc" => continue,
                "w_fc" => fc_bound,
                _ => attn_bound,
            };
            for v in m.as_mut_slice() {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        params
    }

    /// Tensors in flat-vector order with their checkpoint names.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("w_q".to_string(), &self.w_q),
            ("w_k".to_string(), &self.w_k),
            ("w_v".to_string(), &self.w_v),
        ];
        for (h, head) in self.heads.iter().enumerate() {
            out.push((format!("head{h}.w_q"), &head.query));
            out.push((format!("head{h}.w_k"), &head.key));
            out.push((format!("head{h}.w_v"), &head.value));
        }
        out.push(("w_o".to_string(), &self.w_o));
        out.push(("w_fc".to_string(), &self.w_fc));
        out.push(("b_fc".to_string(), &self.b_fc));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = vec![
            ("w_q".to_string(), &mut self.w_q),
            ("w_k".to_string(), &mut self.w_k),
            ("w_v".to_string(), &mut self.w_v),
        ];
        for (h, head) in self.heads.iter_mut().enumerate() {
            out.push((format!("head{h}.w_q"), &mut head.query));
            out.push((format!("head{h}.w_k"), &mut head.key));
            out.push((format!("head{h}.w_v"), &mut head.value));
        }
        out.push(("w_o".to_string(), &mut self.w_o));
        out.push(("w_fc".to_string(), &mut self.w_fc));
        out.push(("b_fc".to_string(), &mut self.b_fc));
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.len());
        for (_, m) in self.tensors() {
            flat.extend_from_slice(m.as_slice());
        }
        flat
    }

    pub fn from_flat(cfg: &EvaluatorConfig, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(cfg);
        params.assign_flat(flat)?;
        Ok(params)
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(EaseError::Shape(format!(
                "flat vector has {} values, parameters need {}",
                flat.len(),
                self.len()
            )));
        }
        let mut offset = 0;
        for (_, m) in self.tensors_mut() {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn matches(&self, cfg: &EvaluatorConfig) -> bool {
        let d = cfg.dim;
        let dh = cfg.head_dim();
        self.w_q.shape() == (d, d)
            && self.w_k.shape() == (d, d)
            && self.w_v.shape() == (d, d)
            && self.w_o.shape() == (d, d)
            && self.heads.len() == cfg.heads
            && self
                .heads
                .iter()
                .all(|h| h.query.shape() == (d, dh) && h.key.shape() == (d, dh) && h.value.shape() == (d, dh))
            && self.w_fc.shape() == (2 * cfg.k_orig, cfg.out_dim())
            && self.b_fc.shape() == (1, cfg.out_dim())
    }
}

/// An `s x k` slice of the feature space with its global identities.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBatch {
    /// Rows are samples, columns are features.
    pub values: Matrix,
    pub feature_ids: Vec<usize>,
    pub sample_ids: Vec<usize>,
    /// Class indices (as `f64`) or regression targets, one per row.
    pub targets: Vec<f64>,
    /// Rows `n_valid..` are padding and are excluded from every loss.
    pub n_valid: usize,
}

impl SubspaceBatch {
    /// Builds the batch for `rows x features` of `space`; every row counts.
    pub fn from_dataset(space: &Dataset, rows: &[usize], features: &[usize]) -> Self {
        Self {
            values: space.matrix(rows, features),
            feature_ids: features.to_vec(),
            sample_ids: rows.to_vec(),
            targets: space.targets_at(rows),
            n_valid: rows.len(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    fn validate(&self, cfg: &EvaluatorConfig) -> Result<()> {
        let (s, k) = self.values.shape();
        if s != cfg.dim {
            return Err(EaseError::InvalidBatch(format!(
                "batch has {s} samples, embedding dimension is {}",
                cfg.dim
            )));
        }
        if k == 0 {
            return Err(EaseError::InvalidBatch("batch has no features".into()));
        }
        if self.feature_ids.len() != k {
            return Err(EaseError::InvalidBatch(format!(
                "{} feature ids for {k} columns",
                self.feature_ids.len()
            )));
        }
        if self.targets.len() != s || self.sample_ids.len() != s {
            return Err(EaseError::InvalidBatch(format!(
                "{} targets and {} sample ids for {s} rows",
                self.targets.len(),
                self.sample_ids.len()
            )));
        }
        if self.n_valid == 0 || self.n_valid > s {
            return Err(EaseError::InvalidBatch(format!(
                "{} valid rows out of {s}",
                self.n_valid
            )));
        }
        let mut seen = vec![false; cfg.k_orig];
        for &f in &self.feature_ids {
            if f >= cfg.k_orig {
                return Err(EaseError::InvalidBatch(format!(
                    "feature id {f} outside the original {} features",
                    cfg.k_orig
                )));
            }
            if std::mem::replace(&mut seen[f], true) {
                return Err(EaseError::InvalidBatch(format!("duplicate feature id {f}")));
            }
        }
        if !self.values.is_finite() {
            return Err(EaseError::InvalidBatch("non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct HeadCache {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    attn: Matrix,
}

/// Activations kept by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    heads: Vec<HeadCache>,
    concat: Matrix,
    /// `s x 2k`: context-enhanced values followed by raw values.
    fc_input: Matrix,
    feature_ids: Vec<usize>,
    predictions: Matrix,
    n_valid: usize,
    cfg: EvaluatorConfig,
}

impl ForwardCache {
    /// Attention weights (`k x k`) of head `h`.
    pub fn attention(&self, h: usize) -> &Matrix {
        &self.heads[h].attn
    }

    pub fn predictions(&self) -> &Matrix {
        &self.predictions
    }
}

/// Runs the evaluator on one batch, returning `s x out_dim` raw outputs
/// (logits for classification).
pub fn forward(
    batch: &SubspaceBatch,
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
) -> Result<(Matrix, ForwardCache)> {
    cfg.validate()?;
    batch.validate(cfg)?;
    if !params.matches(cfg) {
        return Err(EaseError::Shape("parameters do not match the configuration".into()));
    }
    let k = batch.n_features();
    let s = batch.n_samples();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let x = batch.values.transpose();
    let q = x.matmul(&params.w_q);
    let kk = x.matmul(&params.w_k);
    let v = x.matmul(&params.w_v);

    let mut concat = Matrix::zeros(k, cfg.dim);
    let mut heads = Vec::with_capacity(cfg.heads);
    for (h, w) in params.heads.iter().enumerate() {
        let qh = q.matmul(&w.query);
        let kh = kk.matmul(&w.key);
        let vh = v.matmul(&w.value);
        let mut attn = qh.matmul_t(&kh);
        attn.scale(scale);
        for r in 0..k {
            softmax_in_place(attn.row_mut(r));
        }
        concat.set_col_block(h * dh, &attn.matmul(&vh));
        heads.push(HeadCache {
            q: qh,
            k: kh,
            v: vh,
            attn,
        });
    }
    let x_prime = concat.matmul(&params.w_o);

    let mut fc_input = Matrix::zeros(s, 2 * k);
    for i in 0..s {
        let row = fc_input.row_mut(i);
        for j in 0..k {
            row[j] = x_prime[(j, i)];
        }
        row[k..].copy_from_slice(batch.values.row(i));
    }

    let out_dim = cfg.out_dim();
    let mut predictions = Matrix::zeros(s, out_dim);
    for i in 0..s {
        let input = fc_input.row(i);
        let out = predictions.row_mut(i);
        out.copy_from_slice(params.b_fc.row(0));
        for (j, &a) in input.iter().enumerate() {
            let w = params.w_fc.row(cfg.fc_row(&batch.feature_ids, j));
            for (o, &wv) in out.iter_mut().zip(w) {
                *o += a * wv;
            }
        }
    }
    if !predictions.is_finite() {
        return Err(EaseError::InvalidInput("evaluator produced non-finite outputs".into()));
    }

    let cache = ForwardCache {
        x,
        q,
        k: kk,
        v,
        heads,
        concat,
        fc_input,
        feature_ids: batch.feature_ids.clone(),
        predictions: predictions.clone(),
        n_valid: batch.n_valid,
        cfg: *cfg,
    };
    Ok((predictions, cache))
}

/// Mean loss and the per-sample losses it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// Mean softmax cross-entropy (classification) or mean squared error
/// (regression) over every row.
pub fn loss(predictions: &Matrix, targets: &[f64], task: Task) -> Result<LossOutput> {
    masked_loss(predictions, targets, task, predictions.rows())
}

/// Like [`loss`], restricted to the first `n_valid` rows.
pub fn masked_loss(predictions: &Matrix, targets: &[f64], task: Task, n_valid: usize) -> Result<LossOutput> {
    let per_sample = per_sample_terms(predictions, targets, task, n_valid, |_, _| {})?;
    let mean = per_sample.iter().sum::<f64>() / n_valid as f64;
    Ok(LossOutput { mean, per_sample })
}

/// Computes per-sample losses, handing `visit(row, probabilities_or_residual)`
/// the quantities the gradients need.
fn per_sample_terms(
    predictions: &Matrix,
    targets: &[f64],
    task: Task,
    n_valid: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    let s = predictions.rows();
    if targets.len() != s {
        return Err(EaseError::Shape(format!(
            "{} targets for {s} predictions",
            targets.len()
        )));
    }
    if n_valid == 0 || n_valid > s {
        return Err(EaseError::Shape(format!("{n_valid} valid rows out of {s}")));
    }
    let mut per_sample = Vec::with_capacity(n_valid);
    match task {
        Task::Regression => {
            if predictions.cols() != 1 {
                return Err(EaseError::Shape("regression expects one output".into()));
            }
            for i in 0..n_valid {
                let r = predictions[(i, 0)] - targets[i];
                per_sample.push(r * r);
                visit(i, &[r]);
            }
        }
        Task::Classification { classes } => {
            if predictions.cols() != classes {
                return Err(EaseError::Shape(format!(
                    "{} logits for {classes} classes",
                    predictions.cols()
                )));
            }
            let mut probs = vec![0.0; classes];
            for i in 0..n_valid {
                let label = targets[i];
                if !(label >= 0.0 && label.fract() == 0.0 && label < classes as f64) {
                    return Err(EaseError::Label { label, classes });
                }
                let row = predictions.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                per_sample.push(lse - row[label as usize]);
                probs.copy_from_slice(row);
                softmax_in_place(&mut probs);
                visit(i, &probs);
            }
        }
    }
    Ok(per_sample)
}

/// Derivative of the summed loss with respect to the outputs, scaled by
/// `factor`.
fn output_gradient(
    predictions: &Matrix,
    targets: &[f64],
    task: Task,
    n_valid: usize,
    factor: f64,
) -> Result<(LossOutput, Matrix)> {
    let mut grad = Matrix::zeros(predictions.rows(), predictions.cols());
    let per_sample = per_sample_terms(predictions, targets, task, n_valid, |i, terms| {
        let row = grad.row_mut(i);
        match task {
            Task::Regression => row[0] = 2.0 * terms[0] * factor,
            Task::Classification { .. } => {
                for (g, &p) in row.iter_mut().zip(terms) {
                    *g = p * factor;
                }
                row[targets[i] as usize] -= factor;
            }
        }
    })?;
    let mean = per_sample.iter().sum::<f64>() / n_valid as f64;
    Ok((LossOutput { mean, per_sample }, grad))
}

/// Back-propagates `d_out` (`s x out_dim`) through the cached forward pass.
fn backprop(cache: &ForwardCache, d_out: &Matrix, params: &EvaluatorParams) -> EvaluatorParams {
    let cfg = &cache.cfg;
    let k = cache.feature_ids.len();
    let s = cache.fc_input.rows();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut grad = EvaluatorParams::zeros(cfg);

    // FC layer; only rows of present features are touched
    let mut d_x_prime = Matrix::zeros(k, cfg.dim);
    for i in 0..s {
        let go = d_out.row(i);
        for (b, &g) in grad.b_fc.as_mut_slice().iter_mut().zip(go) {
            *b += g;
        }
        let input = cache.fc_input.row(i);
        for (j, &a) in input.iter().enumerate() {
            let r = cfg.fc_row(&cache.feature_ids, j);
            for (w, &g) in grad.w_fc.row_mut(r).iter_mut().zip(go) {
                *w += a * g;
            }
            if j < k {
                d_x_prime[(j, i)] = crate::math::dot(params.w_fc.row(r), go);
            }
        }
    }

    grad.w_o = cache.concat.t_matmul(&d_x_prime);
    let d_concat = d_x_prime.matmul_t(&params.w_o);

    let mut d_q = Matrix::zeros(k, cfg.dim);
    let mut d_k = Matrix::zeros(k, cfg.dim);
    let mut d_v = Matrix::zeros(k, cfg.dim);
    for (h, (hc, w)) in cache.heads.iter().zip(&params.heads).enumerate() {
        let d_head = d_concat.col_block(h * dh, dh);
        let d_attn = d_head.matmul_t(&hc.v);
        let d_vh = hc.attn.t_matmul(&d_head);

        let mut d_scores = Matrix::zeros(k, k);
        for r in 0..k {
            let a = hc.attn.row(r);
            let da = d_attn.row(r);
            let inner = crate::math::dot(a, da);
            for (out, (&ai, &dai)) in d_scores.row_mut(r).iter_mut().zip(a.iter().zip(da)) {
                *out = ai * (dai - inner) * scale;
            }
        }
        let d_qh = d_scores.matmul(&hc.k);
        let d_kh = d_scores.t_matmul(&hc.q);

        let g = &mut grad.heads[h];
        g.query = cache.q.t_matmul(&d_qh);
        g.key = cache.k.t_matmul(&d_kh);
        g.value = cache.v.t_matmul(&d_vh);
        d_q.add_assign(&d_qh.matmul_t(&w.query));
        d_k.add_assign(&d_kh.matmul_t(&w.key));
        d_v.add_assign(&d_vh.matmul_t(&w.value));
    }
    grad.w_q = cache.x.t_matmul(&d_q);
    grad.w_k = cache.x.t_matmul(&d_k);
    grad.w_v = cache.x.t_matmul(&d_v);
    grad
}

fn check_cache(cache: &ForwardCache, targets: &[f64], params: &EvaluatorParams, cfg: &EvaluatorConfig) -> Result<()> {
    if cache.cfg != *cfg {
        return Err(EaseError::Contract(
            "cache was produced under a different configuration".into(),
        ));
    }
    if !params.matches(cfg) {
        return Err(EaseError::Contract("parameters do not match the configuration".into()));
    }
    if targets.len() != cache.fc_input.rows() {
        return Err(EaseError::Contract(format!(
            "{} targets for a cache of {} samples",
            targets.len(),
            cache.fc_input.rows()
        )));
    }
    Ok(())
}

/// Exact gradient of the mean loss of the cached batch, as a flat vector.
pub fn backward(
    cache: &ForwardCache,
    targets: &[f64],
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
) -> Result<Vec<f64>> {
    check_cache(cache, targets, params, cfg)?;
    let n = cache.n_valid;
    let (_, d_out) = output_gradient(&cache.predictions, targets, cfg.task, n, 1.0 / n as f64)?;
    Ok(backprop(cache, &d_out, params).to_flat())
}

/// Forward pass, mean loss and its gradient in one call.
pub fn loss_and_gradient(
    batch: &SubspaceBatch,
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
) -> Result<(LossOutput, Vec<f64>)> {
    let (predictions, cache) = forward(batch, params, cfg)?;
    let n = batch.n_valid;
    let (loss, d_out) = output_gradient(&predictions, &batch.targets, cfg.task, n, 1.0 / n as f64)?;
    Ok((loss, backprop(&cache, &d_out, params).to_flat()))
}

/// Gradient of the batch's summed log-likelihood. Classification uses the
/// softmax likelihood; regression a unit-variance Gaussian, whose
/// log-density is `-(y - y_hat)^2 / 2` up to a constant.
pub fn log_likelihood_grad(batch: &SubspaceBatch, params: &EvaluatorParams, cfg: &EvaluatorConfig) -> Result<Vec<f64>> {
    let (predictions, cache) = forward(batch, params, cfg)?;
    let factor = match cfg.task {
        Task::Classification { .. } => -1.0,
        Task::Regression => -0.5,
    };
    let (_, d_out) = output_gradient(&predictions, &batch.targets, cfg.task, batch.n_valid, factor)?;
    Ok(backprop(&cache, &d_out, params).to_flat())
}

/// Splits `rows` into `dim`-sized batches over `feature_ids`. The last
/// partial batch is padded by repeating its own leading rows.
pub fn evaluation_batches(space: &Dataset, rows: &[usize], feature_ids: &[usize], dim: usize) -> Vec<SubspaceBatch> {
    rows.chunks(dim)
        .map(|chunk| {
            let padded: Vec<usize> = chunk.iter().copied().cycle().take(dim).collect();
            let mut batch = SubspaceBatch::from_dataset(space, &padded, feature_ids);
            batch.n_valid = chunk.len();
            batch
        })
        .collect()
}

/// Per-sample losses of `rows` (in order) restricted to `feature_ids`.
pub fn per_sample_losses(
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
    space: &Dataset,
    rows: &[usize],
    feature_ids: &[usize],
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(EaseError::InvalidInput("empty evaluation split".into()));
    }
    let mut out = Vec::with_capacity(rows.len());
    for batch in evaluation_batches(space, rows, feature_ids, cfg.dim) {
        let (pred, _) = forward(&batch, params, cfg)?;
        out.extend(masked_loss(&pred, &batch.targets, cfg.task, batch.n_valid)?.per_sample);
    }
    Ok(out)
}

/// Performance of the feature set `feature_ids` on `rows`: the negative mean
/// per-sample loss. Higher is better; zero is a perfect fit.
pub fn evaluate_metric(
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
    space: &Dataset,
    rows: &[usize],
    feature_ids: &[usize],
) -> Result<f64> {
    let losses = per_sample_losses(params, cfg, space, rows, feature_ids)?;
    Ok(-losses.iter().sum::<f64>() / losses.len() as f64)
}
