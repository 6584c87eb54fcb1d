use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::drivers::Phrasebook;
use crate::features::{DemandTable, DimensionTaxonomy};
use crate::forest::TrainParams;
use crate::ingest::DatasetSchema;

/// Training configuration as written in the config file. File references are
/// kept verbatim and resolved against the config's directory when loaded, so
/// a bundle never records machine-specific absolute paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub schema: String,
    pub demand_table: String,
    pub taxonomy: String,
    #[serde(default)]
    pub phrasebook: Option<String>,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_true")]
    pub stratify: bool,
    #[serde(default = "default_ridge_eps")]
    pub ridge_eps: f64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Features withheld from the tenure regression, by feature or source
    /// column name.
    #[serde(default)]
    pub tenure_excluded_features: Vec<String>,
    #[serde(default)]
    pub forest: TrainParams,
}

fn default_split_ratio() -> f64 {
    0.8
}

fn default_true() -> bool {
    true
}

fn default_ridge_eps() -> f64 {
    1e-8
}

fn default_top_k() -> usize {
    5
}

/// The tables a training run reads besides the data itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainInputs {
    pub schema: DatasetSchema,
    pub demand: DemandTable,
    pub taxonomy: DimensionTaxonomy,
    pub phrasebook: Phrasebook,
}

impl TrainConfig {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, PipelineError> {
        let config: TrainConfig =
            serde_json::from_slice(bytes).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative references resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), PipelineError> {
        let path = path.as_ref();
        let bytes = read(path)?;
        let config = Self::from_json_slice(&bytes)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(PipelineError::Config(format!(
                "split_ratio {} is outside (0, 1)",
                self.split_ratio
            )));
        }
        if !(self.ridge_eps.is_finite() && self.ridge_eps >= 0.0) {
            return Err(PipelineError::Config(format!(
                "ridge_eps {} must be finite and non-negative",
                self.ridge_eps
            )));
        }
        Ok(())
    }

    pub fn load_inputs(&self, base: &Path) -> Result<TrainInputs, PipelineError> {
        let schema = DatasetSchema::from_json_slice(&read(&base.join(&self.schema))?)?;
        let demand = DemandTable::from_json_slice(&read(&base.join(&self.demand_table))?)?;
        let taxonomy = DimensionTaxonomy::from_json_slice(&read(&base.join(&self.taxonomy))?)?;
        let phrasebook = match &self.phrasebook {
            Some(p) => Phrasebook::from_json_slice(&read(&base.join(p))?)
                .map_err(|e| PipelineError::Config(format!("phrasebook: {e}")))?,
            None => Phrasebook::default(),
        };
        Ok(TrainInputs {
            schema,
            demand,
            taxonomy,
            phrasebook,
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The configuration shipped in the repository's `config/` directory,
/// compiled in so tools work without a config file.
pub mod defaults {
    use super::*;

    pub const TRAIN: &str = include_str!("../../../../config/train.json");
    pub const SCHEMA: &str = include_str!("../../../../config/schema.json");
    pub const DEMAND: &str = include_str!("../../../../config/demand.json");
    pub const TAXONOMY: &str = include_str!("../../../../config/taxonomy.json");
    pub const PHRASEBOOK: &str = include_str!("../../../../config/phrasebook.json");

    pub fn train_config() -> TrainConfig {
        TrainConfig::from_json_slice(TRAIN.as_bytes()).expect("bundled train config is valid")
    }

    pub fn inputs() -> TrainInputs {
        TrainInputs {
            schema: DatasetSchema::from_json_slice(SCHEMA.as_bytes())
                .expect("bundled schema is valid"),
            demand: DemandTable::from_json_slice(DEMAND.as_bytes())
                .expect("bundled demand table is valid"),
            taxonomy: DimensionTaxonomy::from_json_slice(TAXONOMY.as_bytes())
                .expect("bundled taxonomy is valid"),
            phrasebook: Phrasebook::from_json_slice(PHRASEBOOK.as_bytes())
                .expect("bundled phrasebook is valid"),
        }
    }
}
