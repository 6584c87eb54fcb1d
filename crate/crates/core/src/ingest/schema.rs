use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;

/// How a column's cells are parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Two-level column. The first listed level is the "true" level.
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default = "default_true")]
    pub required: bool,
    /// Allowed levels for categorical and boolean columns. When present, cells
    /// outside the set are row errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    /// Categorical levels have a natural order (the order of `levels`) and are
    /// encoded as a single ordinal feature instead of one-hot.
    #[serde(default, skip_serializing_if = "is_false")]
    pub ordered: bool,
}

fn default_true() -> bool {
    true
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Column layout of an HR dataset plus the names of the columns the models
/// give special meaning to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    pub tenure_column: String,
    pub total_years_column: String,
    pub companies_column: String,
    pub compensation_column: String,
    pub job_role_column: String,
    /// Columns that are validated but never become model features.
    #[serde(default)]
    pub excluded_features: Vec<String>,
    pub columns: Vec<ColumnSpec>,
}

impl DatasetSchema {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, IngestError> {
        let schema: DatasetSchema =
            serde_json::from_slice(bytes).map_err(|e| IngestError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_spec(&self) -> &ColumnSpec {
        self.column(&self.target).expect("validated schema has a target column")
    }

    /// Level that encodes `true` in the target column.
    pub fn positive_level(&self) -> &str {
        &self.target_spec().levels.as_ref().expect("validated target has levels")[0]
    }

    pub fn negative_level(&self) -> &str {
        &self.target_spec().levels.as_ref().expect("validated target has levels")[1]
    }

    /// Columns that feed the feature codec, in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| {
            c.name != self.target
                && Some(&c.name) != self.id_column.as_ref()
                && !self.excluded_features.contains(&c.name)
        })
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let mut seen = BTreeSet::new();
        for col in &self.columns {
            if col.name.is_empty() {
                return Err(IngestError::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(IngestError::Schema(format!(
                    "duplicate column name `{}`",
                    col.name
                )));
            }
            match (col.kind, &col.levels) {
                (ColumnKind::Boolean, Some(levels)) if levels.len() == 2 => {
                    if levels[0] == levels[1] {
                        return Err(IngestError::Schema(format!(
                            "boolean column `{}` repeats its level",
                            col.name
                        )));
                    }
                }
                (ColumnKind::Boolean, _) => {
                    return Err(IngestError::Schema(format!(
                        "boolean column `{}` needs exactly two levels",
                        col.name
                    )))
                }
                (ColumnKind::Numeric, Some(_)) => {
                    return Err(IngestError::Schema(format!(
                        "numeric column `{}` cannot declare levels",
                        col.name
                    )))
                }
                (ColumnKind::Categorical, Some(levels)) => {
                    let unique: BTreeSet<_> = levels.iter().collect();
                    if unique.len() != levels.len() || levels.is_empty() {
                        return Err(IngestError::Schema(format!(
                            "categorical column `{}` has empty or repeated levels",
                            col.name
                        )));
                    }
                }
                _ => {}
            }
            if col.ordered && (col.kind != ColumnKind::Categorical || col.levels.is_none()) {
                return Err(IngestError::Schema(format!(
                    "ordered column `{}` must be categorical with declared levels",
                    col.name
                )));
            }
        }

        let target = self
            .column(&self.target)
            .ok_or_else(|| IngestError::Schema(format!("target column `{}` not declared", self.target)))?;
        if target.kind != ColumnKind::Boolean {
            return Err(IngestError::Schema(format!(
                "target column `{}` must be boolean",
                self.target
            )));
        }

        for name in [
            &self.tenure_column,
            &self.total_years_column,
            &self.companies_column,
        ] {
            match self.column(name) {
                Some(c) if c.kind == ColumnKind::Numeric && c.required => {}
                Some(_) => {
                    return Err(IngestError::Schema(format!(
                        "column `{name}` must be a required numeric column"
                    )))
                }
                None => return Err(IngestError::Schema(format!("column `{name}` not declared"))),
            }
        }
        if let Some(id) = &self.id_column {
            if self.column(id).is_none() {
                return Err(IngestError::Schema(format!("id column `{id}` not declared")));
            }
        }
        for name in &self.excluded_features {
            if self.column(name).is_none() {
                return Err(IngestError::Schema(format!(
                    "excluded feature `{name}` not declared"
                )));
            }
        }
        Ok(())
    }

    /// Maps each declared column to its index in a CSV header. Errors on a
    /// missing required column.
    pub(crate) fn bind_header(
        &self,
        header: &[String],
        require_target: bool,
    ) -> Result<BTreeMap<String, usize>, IngestError> {
        let mut positions = BTreeMap::new();
        for col in &self.columns {
            match header.iter().position(|h| h == &col.name) {
                Some(idx) => {
                    positions.insert(col.name.clone(), idx);
                }
                None => {
                    let required = if col.name == self.target {
                        require_target
                    } else {
                        col.required
                    };
                    if required {
                        return Err(IngestError::MissingColumn(col.name.clone()));
                    }
                }
            }
        }
        Ok(positions)
    }
}
