//! CSV ingestion, train-fitted standardization and deterministic splitting.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EaseError, Result};
use crate::math::{Matrix, RandomSource};

/// Largest number of distinct integral target values still treated as classes.
pub const MAX_INFERRED_CLASSES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    pub fn classes(&self) -> Option<usize> {
        match *self {
            Task::Classification { classes } => Some(classes),
            Task::Regression => None,
        }
    }
}

/// How the task kind is decided at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskHint {
    #[default]
    Auto,
    Classification,
    Regression,
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub task: TaskHint,
    /// Header name, or a zero-based column index, of the target column.
    /// Defaults to the last column.
    pub target_col: Option<String>,
}

/// Numeric tabular data stored column-major. Classification targets are
/// dense class indices stored as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    task: Task,
    /// Original target values, indexed by class id.
    class_values: Vec<f64>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, columns: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self> {
        if columns.is_empty() {
            return Err(EaseError::InvalidInput("dataset has no feature columns".into()));
        }
        if feature_names.len() != columns.len() {
            return Err(EaseError::Shape(format!(
                "{} names for {} columns",
                feature_names.len(),
                columns.len()
            )));
        }
        let n = targets.len();
        if n == 0 {
            return Err(EaseError::InvalidInput("dataset has no rows".into()));
        }
        if let Some((f, col)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(EaseError::Shape(format!(
                "column {f} has {} rows, expected {n}",
                col.len()
            )));
        }
        if columns.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(EaseError::InvalidInput("dataset contains non-finite values".into()));
        }
        let mut class_values = Vec::new();
        if let Task::Classification { classes } = task {
            if classes == 0 {
                return Err(EaseError::InvalidInput(
                    "classification needs at least one class".into(),
                ));
            }
            for &t in &targets {
                if t.fract() != 0.0 || t < 0.0 || t >= classes as f64 {
                    return Err(EaseError::Label { label: t, classes });
                }
            }
            class_values = (0..classes).map(|c| c as f64).collect();
        }
        Ok(Self {
            feature_names,
            target_name: "target".into(),
            columns,
            targets,
            task,
            class_values,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn class_values(&self) -> &[f64] {
        &self.class_values
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    /// Row-major `rows.len() x features.len()` extract.
    pub fn matrix(&self, rows: &[usize], features: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), features.len(), |r, c| self.columns[features[c]][rows[r]])
    }

    pub fn targets_at(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&r| self.targets[r]).collect()
    }

    pub fn class_labels_at(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.targets[r] as usize).collect()
    }
}

/// Reads a CSV file: header row, numeric cells, target in the last column
/// unless overridden.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| EaseError::Load(format!("{}: {e}", path.display())))?;
    parse_csv(file, opts)
}

/// Parses CSV from any reader. Never panics on malformed input.
pub fn parse_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| EaseError::Load(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(EaseError::Load("empty file: no header row".into()));
    }
    if header.len() < 2 {
        return Err(EaseError::Load(
            "need at least one feature column and a target column".into(),
        ));
    }
    let target_idx = match &opts.target_col {
        None => header.len() - 1,
        Some(name) => match header.iter().position(|h| h == name) {
            Some(i) => i,
            None => match name.parse::<usize>() {
                Ok(i) if i < header.len() => i,
                _ => {
                    return Err(EaseError::Load(format!("target column {name:?} not found")));
                }
            },
        },
    };

    let width = header.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| EaseError::Load(format!("row {row}: {e}")))?;
        if record.len() != width {
            return Err(EaseError::Load(format!(
                "row {row}: expected {width} cells, found {}",
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(EaseError::Load(format!(
                    "row {row}, column {c} ({}): missing value",
                    header[c]
                )));
            }
            let value: f64 = cell.parse().map_err(|_| {
                EaseError::Load(format!(
                    "row {row}, column {c} ({}): cannot parse {cell:?} as a number",
                    header[c]
                ))
            })?;
            if !value.is_finite() {
                return Err(EaseError::Load(format!(
                    "row {row}, column {c} ({}): non-finite value {cell:?}",
                    header[c]
                )));
            }
            columns[c].push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(EaseError::Load("file has a header but no data rows".into()));
    }

    // -0.0 and 0.0 are the same class
    let raw_targets: Vec<f64> = columns
        .remove(target_idx)
        .into_iter()
        .map(|t| if t == 0.0 { 0.0 } else { t })
        .collect();
    let mut feature_names = header;
    let target_name = feature_names.remove(target_idx);

    let integral = raw_targets.iter().all(|t| t.fract() == 0.0);
    let mut values = raw_targets.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let classify = match opts.task {
        TaskHint::Classification => true,
        TaskHint::Regression => false,
        TaskHint::Auto => integral && values.len() <= MAX_INFERRED_CLASSES,
    };

    let mut dataset = if classify {
        let targets = raw_targets
            .iter()
            .map(|t| values.partition_point(|v| v < t) as f64)
            .collect();
        let mut ds = Dataset::new(
            feature_names,
            columns,
            targets,
            Task::Classification { classes: values.len() },
        )?;
        ds.class_values = values;
        ds
    } else {
        Dataset::new(feature_names, columns, raw_targets, Task::Regression)?
    };
    dataset.target_name = target_name;
    Ok(dataset)
}

/// Disjoint train/validation/test row lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Per-feature affine map fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn inverse(&self, feature: usize, value: f64) -> f64 {
        value * self.scale[feature] + self.mean[feature]
    }
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.6, 0.2, 0.2];

/// Shuffles rows with `seed`, splits by `ratios` (train, validation, test)
/// and z-scores every feature with training-split statistics. Constant
/// columns pass through unscaled.
pub fn standardize_split(ds: &Dataset, ratios: [f64; 3], seed: u64) -> Result<(Dataset, SplitSpec, Standardizer)> {
    if ratios.iter().any(|r| !(*r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(EaseError::InvalidRatio(format!(
            "{ratios:?} must be positive and sum to 1"
        )));
    }
    let n = ds.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    RandomSource::new(seed).shuffle(&mut order);
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train.min(n));
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(EaseError::InvalidRatio(format!(
            "{ratios:?} leaves an empty split for {n} rows"
        )));
    }
    let split = SplitSpec {
        train: order[..n_train].to_vec(),
        validation: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
        seed,
    };

    let mut mean = Vec::with_capacity(ds.n_features());
    let mut scale = Vec::with_capacity(ds.n_features());
    let mut columns = Vec::with_capacity(ds.n_features());
    for col in &ds.columns {
        let m = split.train.iter().map(|&r| col[r]).sum::<f64>() / n_train as f64;
        let var = split.train.iter().map(|&r| (col[r] - m).powi(2)).sum::<f64>() / n_train as f64;
        let sd = var.sqrt();
        let (m, sd) = if sd > 1e-12 { (m, sd) } else { (0.0, 1.0) };
        columns.push(col.iter().map(|v| (v - m) / sd).collect());
        mean.push(m);
        scale.push(sd);
    }
    let out = Dataset { columns, ..ds.clone() };
    Ok((out, split, Standardizer { mean, scale }))
}

/// For regression, returns a copy whose targets are z-scored with the
/// statistics of `rows` (a constant target is only centered), along with the
/// `(mean, scale)` used. Classification data is returned unchanged with
/// `(0, 1)`.
pub fn standardize_targets(ds: &Dataset, rows: &[usize]) -> Result<(Dataset, f64, f64)> {
    if ds.task.is_classification() {
        return Ok((ds.clone(), 0.0, 1.0));
    }
    if rows.is_empty() {
        return Err(EaseError::InvalidArgument("no rows to fit target statistics".into()));
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| ds.targets[r]).sum::<f64>() / n;
    let sd = (rows.iter().map(|&r| (ds.targets[r] - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 { sd } else { 1.0 };
    let targets = ds.targets.iter().map(|t| (t - mean) / scale).collect();
    Ok((Dataset { targets, ..ds.clone() }, mean, scale))
}

/// Regression data with a planted signal `y = 2 x0 - x1 + x2 + N(0, noise)`;
/// every other column is independent Gaussian noise.
pub fn planted_regression(n: usize, n_features: usize, noise: f64, seed: u64) -> Dataset {
    assert!(n_features >= 3);
    let mut rng = RandomSource::new(seed);
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|_| (0..n).map(|_| rng.normal()).collect())
        .collect();
    let targets = (0..n)
        .map(|i| 2.0 * columns[0][i] - columns[1][i] + columns[2][i] + noise * rng.normal())
        .collect();
    let names = (0..n_features).map(|f| format!("x{f}")).collect();
    Dataset::new(names, columns, targets, Task::Regression).expect("generated data is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_csv(text.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn target_standardization_uses_given_rows() {
        let ds = Dataset::new(
            vec!["a".into()],
            vec![vec![0.0; 4]],
            vec![1.0, 3.0, 10.0, -4.0],
            Task::Regression,
        )
        .unwrap();
        let (out, mean, scale) = standardize_targets(&ds, &[0, 1]).unwrap();
        assert_eq!((mean, scale), (2.0, 1.0));
        assert_eq!(out.targets(), &[-1.0, 1.0, 8.0, -6.0]);
        let (flat, _, scale) = standardize_targets(&ds, &[2]).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(flat.targets()[2], 0.0);

        let labels = Dataset::new(
            vec!["a".into()],
            vec![vec![0.0; 2]],
            vec![0.0, 1.0],
            Task::Classification { classes: 2 },
        )
        .unwrap();
        assert_eq!(standardize_targets(&labels, &[0]).unwrap().0, labels);
    }

    #[test]
    fn float_target_is_regression() {
        let ds = parse("a,b,y\n1,2,0.5\n3,4,1.5\n5,6,2.25\n").unwrap();
        assert_eq!(ds.task(), Task::Regression);
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(ds.target_name(), "y");
    }

    #[test]
    fn binary_target_is_classification() {
        let ds = parse("a,y\n1,0\n2,1\n3,1\n").unwrap();
        assert_eq!(ds.task(), Task::Classification { classes: 2 });
        assert_eq!(ds.targets(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn classes_are_reindexed_densely() {
        let ds = parse("a,y\n1,7\n2,3\n3,7\n4,-1\n").unwrap();
        assert_eq!(ds.task(), Task::Classification { classes: 3 });
        assert_eq!(ds.targets(), &[2.0, 1.0, 2.0, 0.0]);
        assert_eq!(ds.class_values(), &[-1.0, 3.0, 7.0]);
    }

    #[test]
    fn task_override_and_target_column() {
        let opts = CsvOptions {
            task: TaskHint::Regression,
            target_col: Some("y".into()),
        };
        let ds = parse_csv("y,a,b\n1,2,3\n0,5,6\n".as_bytes(), &opts).unwrap();
        assert_eq!(ds.task(), Task::Regression);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.targets(), &[1.0, 0.0]);

        let opts = CsvOptions {
            task: TaskHint::Auto,
            target_col: Some("0".into()),
        };
        let ds = parse_csv("y,a\n1,2\n0,5\n".as_bytes(), &opts).unwrap();
        assert_eq!(ds.targets(), &[1.0, 0.0]);
    }

    #[test]
    fn bad_cell_names_its_position() {
        let err = parse("a,b,y\n1,2,3\n4,abc,6\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("column 1"), "{err}");
        assert!(err.contains("abc"), "{err}");
    }

    #[test]
    fn missing_values_and_empty_files_are_rejected() {
        assert!(matches!(parse(""), Err(EaseError::Load(_))));
        assert!(matches!(parse("a,y\n"), Err(EaseError::Load(_))));
        assert!(matches!(parse("a,y\n1,\n"), Err(EaseError::Load(_))));
        assert!(matches!(parse("a,y\n1,2,3\n"), Err(EaseError::Load(_))));
        assert!(matches!(parse("a,y\n1,inf\n"), Err(EaseError::Load(_))));
    }

    #[test]
    fn standardization_uses_train_statistics() {
        let ds = planted_regression(200, 4, 0.1, 1);
        let (std_ds, split, _) = standardize_split(&ds, DEFAULT_SPLIT, 5).unwrap();
        assert_eq!(split.train.len(), 120);
        assert_eq!(split.validation.len(), 40);
        assert_eq!(split.test.len(), 40);
        for f in 0..4 {
            let vals: Vec<f64> = split.train.iter().map(|&r| std_ds.value(r, f)).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
        assert_eq!(std_ds.targets(), ds.targets());
    }

    #[test]
    fn constant_column_passes_through() {
        let columns = vec![vec![3.0; 10], (0..10).map(|v| v as f64).collect()];
        let ds = Dataset::new(
            vec!["c".into(), "v".into()],
            columns,
            (0..10).map(|v| v as f64 * 0.5).collect(),
            Task::Regression,
        )
        .unwrap();
        let (out, _, _) = standardize_split(&ds, DEFAULT_SPLIT, 0).unwrap();
        assert_eq!(out.column(0), &[3.0; 10]);
    }

    #[test]
    fn split_is_seeded_disjoint_and_complete() {
        let ds = planted_regression(50, 3, 0.1, 2);
        let (_, a, _) = standardize_split(&ds, DEFAULT_SPLIT, 9).unwrap();
        let (_, b, _) = standardize_split(&ds, DEFAULT_SPLIT, 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.validation).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let ds = planted_regression(4, 3, 0.1, 2);
        assert!(matches!(
            standardize_split(&ds, [0.5, 0.5, 0.0], 0),
            Err(EaseError::InvalidRatio(_))
        ));
        assert!(matches!(
            standardize_split(&ds, [0.9, 0.05, 0.05], 0),
            Err(EaseError::InvalidRatio(_))
        ));
        assert!(standardize_split(&ds, [0.5, 0.2, 0.2], 0).is_err());
    }

    #[test]
    fn inverse_transform_recovers_values() {
        let ds = planted_regression(80, 5, 0.1, 3);
        let (out, _, st) = standardize_split(&ds, DEFAULT_SPLIT, 4).unwrap();
        for f in 0..5 {
            for r in 0..80 {
                assert!((st.inverse(f, out.value(r, f)) - ds.value(r, f)).abs() < 1e-9);
            }
        }
    }
}
