//! Model artifacts: one JSON document
//!
//! ```text
//! {"checksum": "<sha256 hex>", "format_version": 1, "payload": {...}}
//! ```
//!
//! Object keys are sorted at every level and floats are written in shortest
//! round-trip form, so equal bundles give equal bytes. The checksum covers
//! the compact serialization of `payload`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drivers::Phrasebook;
use crate::features::{DemandTable, DimensionTaxonomy, FeatureCodec};
use crate::forest::Forest;
use crate::ingest::DatasetSchema;
use crate::linreg::RegressionModel;
use crate::pipeline::{EvalMetrics, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Conventional artifact file suffix.
pub const EXTENSION: &str = ".attrition-model.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema: DatasetSchema,
    pub codec: FeatureCodec,
    pub taxonomy: DimensionTaxonomy,
    pub demand: DemandTable,
    pub phrasebook: Phrasebook,
    pub forest: Forest,
    /// Tenure regression, fit on training-split leavers.
    pub regression: RegressionModel,
    pub config: TrainConfig,
    /// Validation metrics from training.
    pub metrics: EvalMetrics,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    pub n_train: usize,
    pub n_validation: usize,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("unsupported format_version {found}; this build reads version {supported}")]
    Version { found: Value, supported: u32 },
    #[error("checksum mismatch: file says {stored}, payload hashes to {computed}")]
    Checksum { stored: String, computed: String },
    #[error("artifact layout: {0}")]
    Layout(String),
    #[error("payload does not describe a model: {0}")]
    Payload(String),
}

pub fn checksum(payload: &Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Canonical artifact bytes.
pub fn encode_bundle(bundle: &ModelBundle) -> Result<Vec<u8>, StoreError> {
    let payload = serde_json::to_value(bundle).map_err(|e| StoreError::Payload(e.to_string()))?;
    let doc = json!({
        "checksum": checksum(&payload),
        "format_version": bundle.format_version,
        "payload": payload,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("JSON values always serialize");
    bytes.push(b'\n');
    Ok(bytes)
}

/// Validates layout, version and checksum, in that order, before decoding.
/// `path` only labels errors.
pub fn decode_bundle(bytes: &[u8], path: &Path) -> Result<ModelBundle, StoreError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| StoreError::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(mut doc) = doc else {
        return Err(StoreError::Layout("top level must be an object".into()));
    };
    let version = doc
        .remove("format_version")
        .ok_or_else(|| StoreError::Layout("missing format_version".into()))?;
    if version.as_u64() != Some(u64::from(FORMAT_VERSION)) {
        return Err(StoreError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let stored = match doc.remove("checksum") {
        Some(Value::String(s)) => s,
        _ => return Err(StoreError::Layout("missing checksum".into())),
    };
    let payload = doc
        .remove("payload")
        .ok_or_else(|| StoreError::Layout("missing payload".into()))?;
    if let Some(extra) = doc.keys().next() {
        return Err(StoreError::Layout(format!("unexpected key `{extra}`")));
    }
    let computed = checksum(&payload);
    if computed != stored {
        return Err(StoreError::Checksum { stored, computed });
    }
    let bundle: ModelBundle =
        serde_json::from_value(payload).map_err(|e| StoreError::Payload(e.to_string()))?;
    if bundle.format_version != FORMAT_VERSION {
        return Err(StoreError::Payload(format!(
            "payload format_version {} disagrees with the header",
            bundle.format_version
        )));
    }
    Ok(bundle)
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let bytes = encode_bundle(bundle)?;
    fs::write(path, bytes).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_bundle(&bytes, path)
}

/// serde_json reports 1-based line and column; columns count bytes.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}
