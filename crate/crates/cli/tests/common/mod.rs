#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ease_core::data::{planted_regression, Dataset};
use serde_json::Value;

/// Writes `ds` as CSV with the target in the last column.
pub fn write_csv(ds: &Dataset, path: &Path) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header: Vec<String> = ds.feature_names().to_vec();
    header.push(ds.target_name().to_string());
    w.write_record(&header).unwrap();
    for row in 0..ds.n_samples() {
        let mut rec: Vec<String> = (0..ds.n_features()).map(|f| ds.value(row, f).to_string()).collect();
        rec.push(ds.targets()[row].to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

/// A planted regression CSV in `dir`.
pub fn planted_csv(dir: &Path, name: &str, n: usize, k: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    write_csv(&planted_regression(n, k, 0.1, seed), &path);
    path
}

pub fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("ease")
        .chain(args.iter().copied())
        .map(String::from)
        .collect()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Removes wall-clock fields: the generation stamp and every `*_ms` key.
pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| k != "generated_at" && !k.ends_with("_ms"));
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

pub fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Panics with every violation when `doc` does not match the shipped schema.
pub fn assert_schema_valid(doc: &Value) {
    let schema = schema();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("report violates schema:\n{}", msgs.join("\n"));
    };
}
