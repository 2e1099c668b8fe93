//! Run configuration: a TOML file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use uiforge_core::taskgen::ScreenTasks;
use uiforge_core::{AdapterConfig, DenoiseConfig, MatchPolicy};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub adapter: AdapterConfig,
    pub denoise: DenoiseConfig,
    pub match_policy: MatchPolicy,
    pub taskgen: TaskgenSection,
    pub providers: ProviderSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskgenSection {
    pub templates: Option<PathBuf>,
    pub tasks: ScreenTasks,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    /// Directory that relative `image_ref` paths are resolved against.
    pub images: Option<PathBuf>,
    pub ocr_cmd: Option<String>,
    /// Reasoning keyword table replacing the builtin one.
    pub keywords: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn jobs(&self, flag: Option<usize>) -> usize {
        flag.or(self.jobs).unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
        })
    }
}
