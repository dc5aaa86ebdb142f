//! Optional JSON configuration file. Every section falls back to the library
//! defaults; command-line flags override the file.

use std::path::Path;

use cochlea_plan::array::ArraySpec;
use cochlea_plan::geometry::{AnatomyLayout, SpiralParams};
use cochlea_plan::metrics::MetricsConfig;
use cochlea_plan::plan::PlanConfig;
use cochlea_plan::stats::PowerConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub spiral: SpiralParams,
    pub layout: AnatomyLayout,
    pub array: ArraySpec,
    pub plan: PlanConfig,
    pub metrics: MetricsConfig,
    pub power: PowerConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}
