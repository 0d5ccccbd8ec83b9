use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pssa_core::filters::{Method, RelaxationConfig};
use pssa_core::simulator::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Identifies the binary that produced a run.
pub fn build_id() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn unix_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Everything needed to reproduce one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunManifest {
    Bench(BenchManifest),
    Ablate(AblateManifest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub task: String,
    /// Preset name, scripted scenario name or file the config came from.
    pub config_source: String,
    /// Resolved config including seed and step overrides.
    pub config: ScenarioConfig,
    pub seed: u64,
    pub method: Method,
    pub method_config: RelaxationConfig,
    pub dump_qp: bool,
    pub output_dir: String,
    /// Files written into `output_dir`.
    pub files: Vec<String>,
    pub status: String,
    pub build: String,
    pub started_unix_ms: u64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateManifest {
    pub task: String,
    pub config_source: String,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub grid_a: Vec<u32>,
    pub grid_b: Vec<u32>,
    pub p: u32,
    /// Root passed as `--out`; results live in `output_dir` below it.
    pub output_root: String,
    pub output_dir: String,
    pub files: Vec<String>,
    pub failed_cells: usize,
    pub build: String,
    pub started_unix_ms: u64,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push('\n');
        fs::write(path, text).map_err(CliError::io(path))
    }
}
