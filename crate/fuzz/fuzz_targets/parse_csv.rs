//! Arbitrary bytes through the CSV loader under every task hint.

#![no_main]
use ease_core::data::{parse_csv, CsvOptions, TaskHint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for task in [TaskHint::Auto, TaskHint::Classification, TaskHint::Regression] {
        let opts = CsvOptions { task, target_col: None };
        let Ok(ds) = parse_csv(data, &opts) else { continue };
        assert!(ds.n_features() >= 1);
        assert_eq!(ds.feature_names().len(), ds.n_features());
        assert_eq!(ds.targets().len(), ds.n_samples());
        for f in 0..ds.n_features() {
            assert_eq!(ds.column(f).len(), ds.n_samples());
            assert!(ds.column(f).iter().all(|v| v.is_finite()));
        }
        if let Some(classes) = ds.task().classes() {
            assert!(ds.targets().iter().all(|&t| t >= 0.0 && (t as usize) < classes));
        }
    }
});
