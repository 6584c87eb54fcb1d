use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::ingest::{Cell, DatasetSchema, EmployeeRecord};

/// Feature names of the derived KPIs, in the order they are appended to every
/// feature vector.
pub const KPI_FEATURES: [&str; 5] = [
    "skill_demand",
    "avg_prior_tenure",
    "est_min_prior_tenure",
    "est_max_prior_tenure",
    "prior_experience_flag",
];

/// Market-demand rating (1 = lowest, 5 = highest) per job role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTable {
    pub entries: BTreeMap<String, u8>,
    pub default: u8,
}

impl DemandTable {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, FeatureError> {
        let table: DemandTable =
            serde_json::from_slice(bytes).map_err(|e| FeatureError::Config(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |what: &str, v: u8| {
            FeatureError::Config(format!("demand rating {v} for {what} is outside 1..=5"))
        };
        if !(1..=5).contains(&self.default) {
            return Err(bad("the default", self.default));
        }
        for (role, &v) in &self.entries {
            if !(1..=5).contains(&v) {
                return Err(bad(role, v));
            }
        }
        Ok(())
    }

    pub fn rating(&self, role: Option<&str>) -> u8 {
        role.and_then(|r| self.entries.get(r))
            .copied()
            .unwrap_or(self.default)
    }
}

/// Engineered features that are not columns of the raw dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedKpis {
    pub skill_demand: u8,
    pub avg_prior_tenure: f64,
    pub est_min_prior_tenure: f64,
    pub est_max_prior_tenure: f64,
    pub prior_experience_flag: bool,
}

impl DerivedKpis {
    /// Values in `KPI_FEATURES` order.
    pub fn values(&self) -> [f64; 5] {
        [
            f64::from(self.skill_demand),
            self.avg_prior_tenure,
            self.est_min_prior_tenure,
            self.est_max_prior_tenure,
            if self.prior_experience_flag { 1.0 } else { 0.0 },
        ]
    }
}

/// Prior-employer tenure estimates.
///
/// Years worked before joining are `max(0, total - current)`, spread over
/// `num_companies_worked` employers. Per-employer tenures are not in the data,
/// so with several prior employers the extremes are bounded: the shortest could
/// be 0 and the longest could be the whole prior span. With exactly one prior
/// employer, min = avg = max.
pub fn derive_kpis(
    record: &EmployeeRecord,
    demand: &DemandTable,
    schema: &DatasetSchema,
) -> DerivedKpis {
    let role = record.get(&schema.job_role_column).and_then(Cell::as_text);
    let skill_demand = demand.rating(role);

    let companies = record.num_companies_worked;
    let prior_years = (record.total_working_years - record.years_at_company).max(0.0);
    if companies <= 0.0 {
        return DerivedKpis {
            skill_demand,
            avg_prior_tenure: 0.0,
            est_min_prior_tenure: 0.0,
            est_max_prior_tenure: 0.0,
            prior_experience_flag: false,
        };
    }
    let avg = prior_years / companies;
    let (min, max) = if companies > 1.0 {
        (0.0, prior_years)
    } else {
        (avg, avg)
    };
    DerivedKpis {
        skill_demand,
        avg_prior_tenure: avg,
        est_min_prior_tenure: min,
        est_max_prior_tenure: max,
        prior_experience_flag: true,
    }
}
