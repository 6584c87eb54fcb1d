use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// The six variable groups every feature is filed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Environment,
    Financial,
    External,
    Work,
    Legal,
    Individual,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Environment,
        Dimension::Financial,
        Dimension::External,
        Dimension::Work,
        Dimension::Legal,
        Dimension::Individual,
    ];
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Environment => "Environment",
            Dimension::Financial => "Financial",
            Dimension::External => "External",
            Dimension::Work => "Work",
            Dimension::Legal => "Legal",
            Dimension::Individual => "Individual",
        };
        f.write_str(s)
    }
}

/// Column or feature name to dimension.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DimensionTaxonomy {
    pub dimensions: BTreeMap<String, Dimension>,
}

impl DimensionTaxonomy {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, FeatureError> {
        serde_json::from_slice(bytes).map_err(|e| FeatureError::Config(e.to_string()))
    }

    /// Exact feature name first, then the source column. `None` means neither
    /// is mapped.
    pub fn lookup(&self, feature: &str, source: &str) -> Option<Dimension> {
        self.dimensions
            .get(feature)
            .or_else(|| self.dimensions.get(source))
            .copied()
    }

    /// Like `lookup`, but unmapped names fall back to `Individual`.
    pub fn resolve(&self, feature: &str, source: &str) -> Dimension {
        self.lookup(feature, source).unwrap_or_else(|| {
            log::warn!("feature `{feature}` has no dimension; filing it under Individual");
            Dimension::Individual
        })
    }
}
