use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vine_core::dataset::{EncodingOptions, DEFAULT_ORDINAL_CARDINALITY};
use vine_core::export::ExportOptions;
use vine_core::interaction::DEFAULT_H_SAMPLE;
use vine_core::model::GbmParams;
use vine_core::pipeline::VineConfig;

use crate::CliError;

/// Everything needed to reproduce a run from the input CSV. Flags override
/// a config file, which overrides these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub target: Option<String>,
    pub categorical: Vec<String>,
    pub ordinal_max_cardinality: usize,
    pub vine: VineConfig,
    pub model: GbmParams,
    /// Shell command of an external model; replaces the internal GBM.
    pub oracle_cmd: Option<String>,
    pub oracle_timeout_secs: u64,
    /// Master seed. Model training, H-statistic sampling, the random
    /// baseline and ICE subsampling all derive from it.
    pub seed: u64,
    pub h_sample: usize,
    pub export: ExportOptions,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            target: None,
            categorical: Vec::new(),
            ordinal_max_cardinality: DEFAULT_ORDINAL_CARDINALITY,
            vine: VineConfig::default(),
            model: GbmParams::default(),
            oracle_cmd: None,
            oracle_timeout_secs: 120,
            seed: 0,
            h_sample: DEFAULT_H_SAMPLE,
            export: ExportOptions::default(),
            out: None,
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn encoding(&self) -> EncodingOptions {
        EncodingOptions {
            ordinal_max_cardinality: self.ordinal_max_cardinality,
            categorical: self.categorical.clone(),
            ..Default::default()
        }
    }

    pub fn dataset_path(&self) -> Result<&Path, CliError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Input("no dataset given".into()))
    }

    pub fn target(&self) -> Result<&str, CliError> {
        self.target
            .as_deref()
            .ok_or_else(|| CliError::Input("no target column given (--target)".into()))
    }

    /// Pushes the master seed into every seeded component.
    pub fn propagate_seed(&mut self) {
        self.model.seed = self.seed;
        self.export.seed = self.seed;
    }
}
