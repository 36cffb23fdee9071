//! Replays the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so the seeds stay meaningful on a stable toolchain.

use std::path::PathBuf;

use ease_cli::config::parse_config;
use ease_core::data::{parse_csv, CsvOptions, TaskHint};
use ease_core::evaluator::Checkpoint;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn csv_seeds() {
    let mut accepted = Vec::new();
    for (name, bytes) in corpus("parse_csv") {
        for task in [TaskHint::Auto, TaskHint::Classification, TaskHint::Regression] {
            let opts = CsvOptions { task, target_col: None };
            let Ok(ds) = parse_csv(bytes.as_slice(), &opts) else {
                continue;
            };
            assert_eq!(ds.feature_names().len(), ds.n_features(), "{name}");
            for f in 0..ds.n_features() {
                assert_eq!(ds.column(f).len(), ds.n_samples(), "{name}");
                assert!(ds.column(f).iter().all(|v| v.is_finite()), "{name}");
            }
            if let Some(classes) = ds.task().classes() {
                assert!(ds.targets().iter().all(|&t| (t as usize) < classes), "{name}");
            }
            accepted.push(name.clone());
        }
    }
    for must in ["regression.csv", "int_labels.csv", "quoted.csv"] {
        assert!(accepted.iter().any(|n| n == must), "{must} rejected");
    }
    for never in [
        "empty.csv",
        "ragged.csv",
        "one_column.csv",
        "non_finite.csv",
        "string_labels.csv",
        "empty_cell.csv",
    ] {
        assert!(!accepted.iter().any(|n| n == never), "{never} accepted");
    }
}

#[test]
fn checkpoint_seeds() {
    let mut accepted = Vec::new();
    for (name, bytes) in corpus("decode_checkpoint") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        let Ok(ckpt) = Checkpoint::from_json(text) else {
            continue;
        };
        let params = ckpt.to_params().unwrap();
        let again = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(again.to_params().unwrap(), params, "{name}");
        accepted.push(name);
    }
    assert_eq!(accepted, ["classification.json", "regression.json"]);
}

#[test]
fn config_seeds() {
    let mut accepted = Vec::new();
    for (name, bytes) in corpus("parse_config") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if parse_config(text).is_ok() {
            accepted.push(name);
        }
    }
    assert_eq!(accepted, ["benchmark.toml", "run.toml", "tuning.toml"]);
}
