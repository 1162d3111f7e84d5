use std::fs;
use std::path::{Path, PathBuf};

use maneuverforge_core::llm::LlmConfig;
use maneuverforge_core::orchestrator::LoopConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TASK: &str = "Execute a J-turn maneuver.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Exports {
    pub trajectory_csv: bool,
    pub velocity_csv: bool,
    pub iteration_log: bool,
}

impl Default for Exports {
    fn default() -> Self {
        Self { trajectory_csv: true, velocity_csv: true, iteration_log: true }
    }
}

/// On-disk run configuration. Unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub task: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub exports: Exports,
    pub llm: LlmConfig,
    /// Fixture to replay from.
    pub fixture: Option<PathBuf>,
    /// Fixture to append live responses to.
    pub record_fixture: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfigFile, ConfigError> {
    let cfg: RunConfigFile =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    cfg.llm.check().map_err(|e| ConfigError(format!("{origin}: llm: {e}")))?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> Result<RunConfigFile, ConfigError> {
    match path {
        None => Ok(RunConfigFile::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            parse(&text, &p.display().to_string())
        }
    }
}
