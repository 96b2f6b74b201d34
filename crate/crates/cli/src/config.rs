//! Configuration files. Top-level keys set global options and each
//! subcommand reads its own section; command-line flags win over the file.
//!
//! ```toml
//! seed = 7
//! format = "json"
//!
//! [bench]
//! preset = "table1"
//! sigma2 = 2.0
//! methods = ["SymmPI", "Conformal"]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    #[serde(default)]
    pub bench: BenchFile,
    #[serde(default, rename = "predict-hierarchical")]
    pub hierarchical: HierarchicalFile,
    #[serde(default, rename = "predict-graph")]
    pub graph: GraphFile,
    #[serde(default, rename = "predict-rotation")]
    pub rotation: RotationFile,
    #[serde(default, rename = "test-equivariance")]
    pub equivariance: EquivarianceFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchFile {
    pub preset: Option<String>,
    pub alpha: Option<f64>,
    pub sigma2: Option<f64>,
    pub trials: Option<usize>,
    pub tests: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub branches: Option<usize>,
    pub c: Option<f64>,
    pub scale: Option<String>,
    pub grid_points: Option<usize>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HierarchicalFile {
    pub data: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub mode: Option<String>,
    pub c: Option<f64>,
    pub grid: Option<usize>,
    pub random_sizes: Option<bool>,
    pub scale: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GraphFile {
    pub values: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub generators: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub psi: Option<String>,
    pub grid: Option<usize>,
    pub cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RotationFile {
    pub points: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub mc: Option<usize>,
    pub resolution: Option<usize>,
    pub extent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EquivarianceFile {
    pub map: Option<String>,
    pub group: Option<String>,
    pub samples: Option<usize>,
    pub blocks: Option<usize>,
    pub block_size: Option<usize>,
    pub c: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<FileConfig, toml::de::Error> {
    toml::from_str(text)
}
