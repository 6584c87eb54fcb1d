use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kpi::{DerivedKpis, KPI_FEATURES};
use super::taxonomy::{Dimension, DimensionTaxonomy};
use super::FeatureError;
use crate::ingest::{Cell, ColumnKind, DatasetSchema, EmployeeRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Encoding {
    Passthrough,
    /// One indicator per level, levels sorted alphabetically.
    OneHot { levels: Vec<String> },
    /// Position in `levels`, starting at 1. Unseen levels encode as 0.
    Ordinal { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRule {
    pub column: String,
    pub encoding: Encoding,
}

/// Fitted mapping from records to fixed-order numeric vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCodec {
    pub rules: Vec<ColumnRule>,
    pub feature_names: Arc<Vec<String>>,
    /// Source column (or KPI name) of each feature. One-hot siblings share a source.
    pub sources: Vec<String>,
    pub dimensions: Vec<Dimension>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Arc<Vec<String>>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Encoding fallbacks taken for one record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeDiagnostics {
    /// (column, level) pairs not seen when the codec was fitted.
    pub unseen_levels: Vec<(String, String)>,
    /// Optional columns absent from the record; encoded as 0.
    pub missing_values: Vec<String>,
}

impl EncodeDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.unseen_levels.is_empty() && self.missing_values.is_empty()
    }
}

/// Fits encoding rules on training rows only.
pub fn fit_codec(
    train: &[EmployeeRecord],
    schema: &DatasetSchema,
    taxonomy: &DimensionTaxonomy,
) -> Result<FeatureCodec, FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let labels: BTreeSet<Option<bool>> = train.iter().map(|r| r.attrition).collect();
    if labels.contains(&None) {
        return Err(FeatureError::UnlabeledTrainingRow);
    }
    if labels.len() < 2 {
        return Err(FeatureError::SingleClass);
    }

    let mut rules = Vec::new();
    let mut names = Vec::new();
    let mut sources = Vec::new();

    for col in schema.feature_columns() {
        let encoding = match col.kind {
            ColumnKind::Numeric => Encoding::Passthrough,
            ColumnKind::Categorical if col.ordered => Encoding::Ordinal {
                levels: col.levels.clone().unwrap_or_default(),
            },
            ColumnKind::Categorical | ColumnKind::Boolean => {
                let observed: BTreeSet<&str> = train
                    .iter()
                    .filter_map(|r| r.get(&col.name).and_then(Cell::as_text))
                    .collect();
                Encoding::OneHot {
                    levels: observed.into_iter().map(str::to_owned).collect(),
                }
            }
        };
        match &encoding {
            Encoding::Passthrough | Encoding::Ordinal { .. } => {
                names.push(col.name.clone());
                sources.push(col.name.clone());
            }
            Encoding::OneHot { levels } => {
                for level in levels {
                    names.push(format!("{}={}", col.name, level));
                    sources.push(col.name.clone());
                }
            }
        }
        rules.push(ColumnRule {
            column: col.name.clone(),
            encoding,
        });
    }
    for kpi in KPI_FEATURES {
        names.push(kpi.to_owned());
        sources.push(kpi.to_owned());
    }

    let dimensions = names
        .iter()
        .zip(&sources)
        .map(|(n, s)| taxonomy.resolve(n, s))
        .collect();

    Ok(FeatureCodec {
        rules,
        feature_names: Arc::new(names),
        sources,
        dimensions,
    })
}

impl FeatureCodec {
    pub fn len(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_names.is_empty()
    }

    pub fn index_of(&self, feature: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == feature)
    }

    /// Deterministic; never fails. Fallbacks are reported in the diagnostics.
    pub fn encode(
        &self,
        record: &EmployeeRecord,
        kpis: &DerivedKpis,
    ) -> (FeatureVector, EncodeDiagnostics) {
        let mut values = Vec::with_capacity(self.len());
        let mut diag = EncodeDiagnostics::default();

        for rule in &self.rules {
            let cell = record.get(&rule.column);
            match &rule.encoding {
                Encoding::Passthrough => match cell.and_then(Cell::as_number) {
                    Some(v) => values.push(v),
                    None => {
                        diag.missing_values.push(rule.column.clone());
                        values.push(0.0);
                    }
                },
                Encoding::OneHot { levels } => {
                    let level = cell.map(Cell::to_string);
                    let hit = level
                        .as_deref()
                        .and_then(|l| levels.iter().position(|x| x == l));
                    match (&level, hit) {
                        (None, _) => diag.missing_values.push(rule.column.clone()),
                        (Some(l), None) => diag.unseen_levels.push((rule.column.clone(), l.clone())),
                        _ => {}
                    }
                    values.extend((0..levels.len()).map(|i| if Some(i) == hit { 1.0 } else { 0.0 }));
                }
                Encoding::Ordinal { levels } => {
                    let level = cell.map(Cell::to_string);
                    let pos = level
                        .as_deref()
                        .and_then(|l| levels.iter().position(|x| x == l));
                    match (&level, pos) {
                        (None, _) => diag.missing_values.push(rule.column.clone()),
                        (Some(l), None) => diag.unseen_levels.push((rule.column.clone(), l.clone())),
                        _ => {}
                    }
                    values.push(pos.map_or(0.0, |p| (p + 1) as f64));
                }
            }
        }
        values.extend(kpis.values());
        debug_assert_eq!(values.len(), self.len());

        (
            FeatureVector {
                values,
                names: Arc::clone(&self.feature_names),
            },
            diag,
        )
    }

    /// True when every fitted feature has a dimension.
    pub fn taxonomy_is_total(&self) -> bool {
        self.dimensions.len() == self.feature_names.len()
    }
}
