//! Flat TOML run configuration. Keys mirror the command-line flags
//! (`target-k = 5`, `evaluator = "forest"`, ...); flags given on the command
//! line override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// One dataset path or a list of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DataPaths {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl DataPaths {
    pub fn into_vec(self) -> Vec<PathBuf> {
        match self {
            DataPaths::One(p) => vec![p],
            DataPaths::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<DataPaths>,
    pub task: Option<String>,
    pub target_k: Option<usize>,
    pub target_col: Option<String>,
    pub evaluator: Option<String>,
    pub evaluators: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub max_iters: Option<usize>,
    pub lambda: Option<f64>,
    pub heads: Option<usize>,
    pub dim: Option<usize>,
    pub drop_fraction: Option<f64>,
    pub trees: Option<usize>,
    pub subspaces: Option<usize>,
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Reads a configuration file; relative dataset paths are resolved against
/// the file's directory.
pub fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
    cfg.data = cfg.data.map(|d| match d {
        DataPaths::One(p) => DataPaths::One(resolve(p)),
        DataPaths::Many(v) => DataPaths::Many(v.into_iter().map(resolve).collect()),
    });
    cfg.out = cfg.out.map(resolve);
    Ok(cfg)
}
