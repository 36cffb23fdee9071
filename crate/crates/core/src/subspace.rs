//! Feature-sample subspace generation: leave-one-out feature scoring,
//! error-proportional sample selection by CDF inversion, and assembly of the
//! fixed-size subspaces the evaluator trains on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EaseError, Result};
use crate::evaluator::{evaluate_metric, EvaluatorConfig, EvaluatorParams, SubspaceBatch};
use crate::math::RandomSource;

/// Importance of one feature: metric with it minus metric without it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature_id: usize,
    pub score: f64,
}

/// Scores every active feature by the metric drop when its token is removed.
/// The same parameters are used for every evaluation; nothing is retrained.
pub fn feature_scores(
    params: &EvaluatorParams,
    cfg: &EvaluatorConfig,
    space: &Dataset,
    eval_rows: &[usize],
    active: &[usize],
) -> Result<Vec<FeatureScore>> {
    if active.len() < 2 {
        return Err(EaseError::CannotScore(format!(
            "{} active feature(s); removal needs at least two",
            active.len()
        )));
    }
    let full = evaluate_metric(params, cfg, space, eval_rows, active)?;
    let mut scores = Vec::with_capacity(active.len());
    let mut rest = Vec::with_capacity(active.len() - 1);
    for (i, &f) in active.iter().enumerate() {
        rest.clear();
        rest.extend(active.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &g)| g));
        let without = evaluate_metric(params, cfg, space, eval_rows, &rest)?;
        scores.push(FeatureScore {
            feature_id: f,
            score: full - without,
        });
    }
    Ok(scores)
}

/// The `k` highest-scoring feature ids, sorted by id. Equal scores prefer
/// the lower id.
pub fn top_k_features(scores: &[FeatureScore], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(EaseError::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            scores.len()
        )));
    }
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.feature_id.cmp(&b.feature_id)));
    let mut chosen: Vec<usize> = ranked[..k].iter().map(|s| s.feature_id).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Sampling probabilities and their running sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDistribution {
    pub probabilities: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl SampleDistribution {
    pub fn uniform(n: usize) -> Self {
        Self::from_probabilities(vec![1.0 / n as f64; n])
    }

    fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Self {
            probabilities,
            cumulative,
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// First index whose cumulative probability reaches `r`, skipping
    /// zero-probability entries.
    pub fn invert(&self, r: f64) -> usize {
        let n = self.cumulative.len();
        let mut i = self.cumulative.partition_point(|&c| c < r).min(n - 1);
        while self.probabilities[i] == 0.0 && i + 1 < n {
            i += 1;
        }
        // r beyond a cumulative total slightly below 1 lands on trailing zeros
        while self.probabilities[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

/// `p_i = L_i / sum(L)`; all-zero losses fall back to uniform.
pub fn error_distribution(per_sample_losses: &[f64]) -> Result<SampleDistribution> {
    if per_sample_losses.is_empty() {
        return Err(EaseError::InvalidInput("no per-sample losses".into()));
    }
    if let Some(bad) = per_sample_losses.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(EaseError::InvalidInput(format!(
            "per-sample loss {bad} is negative or non-finite"
        )));
    }
    let total: f64 = per_sample_losses.iter().sum();
    if total == 0.0 {
        return Ok(SampleDistribution::uniform(per_sample_losses.len()));
    }
    Ok(SampleDistribution::from_probabilities(
        per_sample_losses.iter().map(|l| l / total).collect(),
    ))
}

/// A multiset of sample indices drawn with replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleIndexSet(pub Vec<usize>);

/// `count` draws with replacement: each draws `r ~ U[0, 1)` and takes the
/// first index with `C_i >= r`.
pub fn weighted_sample(dist: &SampleDistribution, rng: &mut RandomSource, count: usize) -> Result<SampleIndexSet> {
    if count == 0 {
        return Err(EaseError::InvalidArgument("sample count must be at least 1".into()));
    }
    if dist.is_empty() {
        return Err(EaseError::InvalidArgument("empty distribution".into()));
    }
    Ok(SampleIndexSet(
        (0..count).map(|_| dist.invert(rng.next_uniform())).collect(),
    ))
}

/// Default subspace count: enough batches to cover the training split once,
/// and never fewer than eight.
pub fn default_subspace_count(n_train: usize, s: usize) -> usize {
    n_train.div_ceil(s).max(8)
}

/// `q` subspaces of `s` rows drawn uniformly with replacement from `pool`
/// (global sample ids), restricted to `features`.
pub fn build_subspaces(
    space: &Dataset,
    features: &[usize],
    pool: &SampleIndexSet,
    s: usize,
    q: usize,
    rng: &mut RandomSource,
) -> Result<Vec<SubspaceBatch>> {
    if features.is_empty() {
        return Err(EaseError::InvalidArgument("empty feature set".into()));
    }
    if pool.0.is_empty() || s == 0 || q == 0 {
        return Err(EaseError::InvalidArgument(format!(
            "pool of {}, s = {s}, q = {q}",
            pool.0.len()
        )));
    }
    if let Some(&bad) = pool.0.iter().find(|&&i| i >= space.n_samples()) {
        return Err(EaseError::InvalidArgument(format!("sample id {bad} out of range")));
    }
    if let Some(&bad) = features.iter().find(|&&f| f >= space.n_features()) {
        return Err(EaseError::InvalidArgument(format!("feature id {bad} out of range")));
    }
    Ok((0..q)
        .map(|_| {
            let rows: Vec<usize> = (0..s).map(|_| pool.0[rng.index(pool.0.len())]).collect();
            SubspaceBatch::from_dataset(space, &rows, features)
        })
        .collect())
}

/// Pre-training subspaces: samples uniform over `train_rows`, every original
/// feature present.
pub fn random_subspaces(
    space: &Dataset,
    train_rows: &[usize],
    s: usize,
    q: usize,
    rng: &mut RandomSource,
) -> Result<Vec<SubspaceBatch>> {
    let features: Vec<usize> = (0..space.n_features()).collect();
    build_subspaces(space, &features, &SampleIndexSet(train_rows.to_vec()), s, q, rng)
}

/// Last known loss of every training sample. Samples never evaluated are
/// assigned the mean of the known losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBook {
    losses: BTreeMap<usize, f64>,
}

impl LossBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records losses observed in one pass; repeated ids are averaged.
    pub fn record(&mut self, observations: impl IntoIterator<Item = (usize, f64)>) {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for (id, loss) in observations {
            let e = sums.entry(id).or_insert((0.0, 0));
            e.0 += loss;
            e.1 += 1;
        }
        for (id, (sum, n)) in sums {
            self.losses.insert(id, sum / n as f64);
        }
    }

    pub fn get(&self, id: usize) -> Option<f64> {
        self.losses.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Loss vector aligned with `rows`.
    pub fn losses_for(&self, rows: &[usize]) -> Vec<f64> {
        let mean = if self.losses.is_empty() {
            0.0
        } else {
            self.losses.values().sum::<f64>() / self.losses.len() as f64
        };
        rows.iter().map(|r| self.get(*r).unwrap_or(mean)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{planted_regression, Task};

    fn scores(values: &[f64]) -> Vec<FeatureScore> {
        values
            .iter()
            .enumerate()
            .map(|(feature_id, &score)| FeatureScore { feature_id, score })
            .collect()
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_features(&scores(&[0.3, 0.1, 0.2]), 2).unwrap(), vec![0, 2]);
        assert_eq!(top_k_features(&scores(&[0.5, 0.5, 0.5]), 2).unwrap(), vec![0, 1]);
        assert_eq!(top_k_features(&scores(&[-1.0, 3.0, 0.0]), 3).unwrap(), vec![0, 1, 2]);
        assert!(top_k_features(&scores(&[1.0]), 0).is_err());
        assert!(top_k_features(&scores(&[1.0]), 2).is_err());
    }

    #[test]
    fn error_distribution_examples() {
        let d = error_distribution(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.probabilities, vec![0.25, 0.25, 0.5]);
        assert_eq!(d.cumulative, vec![0.25, 0.5, 1.0]);

        let d = error_distribution(&[0.0, 0.0, 0.0]).unwrap();
        for p in d.probabilities {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }

        let d = error_distribution(&[5.0]).unwrap();
        assert_eq!((d.probabilities, d.cumulative), (vec![1.0], vec![1.0]));

        assert!(error_distribution(&[1.0, -0.5]).is_err());
        assert!(error_distribution(&[]).is_err());
    }

    #[test]
    fn cdf_inversion_by_hand() {
        let d = SampleDistribution::from_probabilities(vec![0.2, 0.3, 0.5]);
        assert_eq!(d.invert(0.25), 1);
        assert_eq!(d.invert(0.0), 0);
        assert_eq!(d.invert(0.2), 0);
        assert_eq!(d.invert(0.999), 2);
        let single = SampleDistribution::from_probabilities(vec![1.0]);
        let mut rng = RandomSource::new(0);
        for _ in 0..10 {
            assert_eq!(weighted_sample(&single, &mut rng, 1).unwrap().0, vec![0]);
        }
    }

    #[test]
    fn zero_probability_entries_are_never_drawn() {
        let d = error_distribution(&[0.0, 1.0, 0.0, 3.0, 0.0]).unwrap();
        assert_eq!(d.invert(0.0), 1);
        assert_eq!(d.invert(1.0 + 1e-12), 3);
        let mut rng = RandomSource::new(5);
        let draws = weighted_sample(&d, &mut rng, 10_000).unwrap();
        assert!(draws.0.iter().all(|&i| i == 1 || i == 3));
    }

    #[test]
    fn sampled_frequencies_follow_probabilities() {
        let d = SampleDistribution::from_probabilities(vec![0.2, 0.3, 0.5]);
        let mut rng = RandomSource::new(17);
        let draws = weighted_sample(&d, &mut rng, 100_000).unwrap();
        let mut counts = [0usize; 3];
        for i in draws.0 {
            counts[i] += 1;
        }
        for (c, p) in counts.iter().zip(&d.probabilities) {
            assert!((*c as f64 / 100_000.0 - p).abs() < 0.02);
        }
    }

    #[test]
    fn singleton_pool_repeats_its_sample() {
        let ds = planted_regression(10, 3, 0.1, 1);
        let mut rng = RandomSource::new(2);
        let batches = build_subspaces(&ds, &[0, 2], &SampleIndexSet(vec![7]), 4, 2, &mut rng).unwrap();
        assert_eq!(batches.len(), 2);
        for b in &batches {
            assert_eq!(b.sample_ids, vec![7; 4]);
            assert_eq!(b.values.shape(), (4, 2));
            assert_eq!(b.targets, vec![ds.targets()[7]; 4]);
        }
    }

    #[test]
    fn subspace_shapes_and_determinism() {
        let ds = planted_regression(40, 5, 0.1, 1);
        let pool = SampleIndexSet((0..40).collect());
        let make = || {
            let mut rng = RandomSource::new(3);
            build_subspaces(&ds, &[1, 3, 4], &pool, 8, 3, &mut rng).unwrap()
        };
        let batches = make();
        assert_eq!(batches.len(), 3);
        assert!(batches.iter().all(|b| b.values.shape() == (8, 3)));
        assert_eq!(batches, make());
        assert!(build_subspaces(&ds, &[], &pool, 8, 3, &mut RandomSource::new(0)).is_err());
    }

    #[test]
    fn random_subspaces_use_every_feature() {
        let ds = planted_regression(50, 6, 0.1, 1);
        let rows: Vec<usize> = (0..30).collect();
        let a = random_subspaces(&ds, &rows, 8, 4, &mut RandomSource::new(9)).unwrap();
        let b = random_subspaces(&ds, &rows, 8, 4, &mut RandomSource::new(9)).unwrap();
        assert_eq!(a, b);
        for batch in &a {
            assert_eq!(batch.values.shape(), (8, 6));
            assert_eq!(batch.feature_ids, (0..6).collect::<Vec<_>>());
            assert!(batch.sample_ids.iter().all(|&i| i < 30));
        }
    }

    #[test]
    fn random_subspaces_cover_the_training_split() {
        // P(a given sample is missed by 1600 uniform draws over 100) ~ 1e-7
        let ds = planted_regression(100, 3, 0.1, 1);
        let rows: Vec<usize> = (0..100).collect();
        for seed in 0..10 {
            let batches = random_subspaces(&ds, &rows, 32, 50, &mut RandomSource::new(seed)).unwrap();
            let mut seen = [false; 100];
            for b in &batches {
                for &i in &b.sample_ids {
                    seen[i] = true;
                }
            }
            assert!(seen.iter().filter(|&&v| v).count() >= 95);
        }
    }

    #[test]
    fn default_q_covers_an_epoch() {
        assert_eq!(default_subspace_count(10, 32), 8);
        assert_eq!(default_subspace_count(360, 32), 12);
        assert_eq!(default_subspace_count(384, 32), 12);
    }

    #[test]
    fn loss_book_carries_forward_and_fills_with_mean() {
        let mut book = LossBook::new();
        book.record([(1, 2.0), (3, 4.0), (3, 6.0)]);
        assert_eq!(book.losses_for(&[1, 3, 9]), vec![2.0, 5.0, 3.5]);
        book.record([(1, 1.0)]);
        assert_eq!(book.get(1), Some(1.0));
        assert_eq!(book.get(3), Some(5.0));
    }

    #[test]
    fn null_feature_scores_zero_and_scores_add_up() {
        use crate::evaluator::{evaluate_metric, EvaluatorConfig, EvaluatorParams};
        use crate::math::Matrix;
        let ds = planted_regression(30, 4, 0.1, 3);
        let cfg = EvaluatorConfig::new(4, 2, 4, Task::Regression).unwrap();
        let mut params = EvaluatorParams::init(&cfg, &mut RandomSource::new(1));
        params.w_o = Matrix::zeros(4, 4);
        params.w_fc[(3, 0)] = 0.0;
        params.w_fc[(7, 0)] = 0.0;
        let rows: Vec<usize> = (0..30).collect();
        let active = [0, 1, 2, 3];
        let s = feature_scores(&params, &cfg, &ds, &rows, &active).unwrap();
        assert_eq!(s[3].score, 0.0);

        let full = evaluate_metric(&params, &cfg, &ds, &rows, &active).unwrap();
        let without: f64 = (0..4)
            .map(|i| {
                let rest: Vec<usize> = active.iter().copied().filter(|&f| f != active[i]).collect();
                evaluate_metric(&params, &cfg, &ds, &rows, &rest).unwrap()
            })
            .sum();
        let total: f64 = s.iter().map(|x| x.score).sum();
        assert!((total - (4.0 * full - without)).abs() < 1e-12);

        assert!(matches!(
            feature_scores(&params, &cfg, &ds, &rows, &[2]),
            Err(EaseError::CannotScore(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn top_k_matches_sort_and_take(values in proptest::collection::vec(-5i32..5, 1..20), k_seed in 0usize..100) {
            let sc = scores(&values.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let k = k_seed % sc.len() + 1;
            let mut brute: Vec<(i32, usize)> = values.iter().enumerate().map(|(i, &v)| (-v, i)).collect();
            brute.sort();
            let mut expected: Vec<usize> = brute[..k].iter().map(|&(_, i)| i).collect();
            expected.sort();
            proptest::prop_assert_eq!(top_k_features(&sc, k).unwrap(), expected);
        }

        #[test]
        fn error_distribution_is_scale_invariant_and_monotone(
            losses in proptest::collection::vec(0.0f64..10.0, 1..30),
            c in 0.01f64..100.0,
        ) {
            proptest::prop_assume!(losses.iter().sum::<f64>() > 0.0);
            let a = error_distribution(&losses).unwrap();
            let scaled: Vec<f64> = losses.iter().map(|l| l * c).collect();
            let b = error_distribution(&scaled).unwrap();
            for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in a.cumulative.iter().zip(&b.cumulative) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
            proptest::prop_assert!((a.cumulative.last().unwrap() - 1.0).abs() < 1e-9);
            proptest::prop_assert!(a.cumulative.windows(2).all(|w| w[0] <= w[1]));
            for i in 0..losses.len() {
                for j in 0..losses.len() {
                    if losses[i] > losses[j] {
                        proptest::prop_assert!(a.probabilities[i] > a.probabilities[j]);
                    }
                }
            }
        }
    }
}
