//! Training, evaluation, scoring, what-if analysis and candidate screening
//! around a single [`ModelBundle`].

mod config;
mod metrics;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use config::{defaults, TrainConfig, TrainInputs};
pub use metrics::{Confusion, EvalMetrics, RegressionMetrics};

use crate::drivers::{
    forest_contributions, tenure_contributions, top_reasons, DriverError, DriverReport, FeatureMeta,
    ReasonKind,
};
use crate::features::{derive_kpis, fit_codec, EncodeDiagnostics, FeatureError, FeatureVector, KPI_FEATURES};
use crate::forest::{
    classify, predict_proba, train_forest, Execution, ForestError, Label, TrainingData,
};
use crate::ingest::{split_train_validation, Cell, EmployeeId, EmployeeRecord, IngestError, RowError};
use crate::linreg::{fit_ols_columns, lead_time, predict_ttl, RegressionError, TenurePrediction};
use crate::model_store::{ModelBundle, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("features: {0}")]
    Features(#[from] FeatureError),
    #[error("forest: {0}")]
    Forest(#[from] ForestError),
    #[error("regression: {0}")]
    Regression(#[from] RegressionError),
    #[error("drivers: {0}")]
    Drivers(#[from] DriverError),
    #[error("invalid record: {0}")]
    Record(RowError),
    #[error("training split has {0} leaver(s); the tenure regression needs at least 2")]
    TooFewLeavers(usize),
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("record {0} has no attrition label")]
    Unlabeled(EmployeeId),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid override for `{column}`: {message}")]
    InvalidOverride { column: String, message: String },
}

/// Run-time choices that do not affect the trained model's content other
/// than its timestamp.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub execution: Execution,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    /// Held-out rows, in input order.
    pub validation: Vec<EmployeeRecord>,
}

impl TrainOutcome {
    pub fn metrics(&self) -> &EvalMetrics {
        &self.bundle.metrics
    }
}

/// Splits, fits codec, forest and tenure regression on the training part,
/// and evaluates on the held-out part. The tenure regression is fit on
/// training leavers only, with their final `years_at_company` as target.
pub fn train_all(
    records: &[EmployeeRecord],
    config: &TrainConfig,
    inputs: &TrainInputs,
    options: TrainOptions,
) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    inputs.demand.validate()?;
    let seed = config.forest.seed;
    let (train, validation) =
        split_train_validation(records, config.split_ratio, seed, config.stratify)?;

    let codec = fit_codec(&train, &inputs.schema, &inputs.taxonomy)?;
    let rows: Vec<Vec<f64>> = train
        .par_iter()
        .map(|r| {
            let kpis = derive_kpis(r, &inputs.demand, &inputs.schema);
            codec.encode(r, &kpis).0.values
        })
        .collect();
    let labels: Vec<bool> = train.iter().map(|r| r.attrition == Some(true)).collect();

    let data = TrainingData::from_rows(&rows, &labels)?;
    let forest = train_forest(&data, &codec.feature_names, &config.forest, options.execution)?;

    let leavers: Vec<usize> = (0..train.len()).filter(|&i| labels[i]).collect();
    if leavers.len() < 2 {
        return Err(PipelineError::TooFewLeavers(leavers.len()));
    }
    let columns: Vec<usize> = (0..codec.len())
        .filter(|&j| {
            let excluded = &config.tenure_excluded_features;
            !excluded.contains(&codec.feature_names[j]) && !excluded.contains(&codec.sources[j])
        })
        .collect();
    let names: Vec<String> = columns.iter().map(|&j| codec.feature_names[j].clone()).collect();
    let x: Vec<Vec<f64>> = leavers.iter().map(|&i| rows[i].clone()).collect();
    let y: Vec<f64> = leavers.iter().map(|&i| train[i].years_at_company).collect();
    let regression = fit_ols_columns(&x, &y, config.ridge_eps, &columns, &names)?;

    let mut bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        schema: inputs.schema.clone(),
        codec,
        taxonomy: inputs.taxonomy.clone(),
        demand: inputs.demand.clone(),
        phrasebook: inputs.phrasebook.clone(),
        forest,
        regression,
        config: config.clone(),
        metrics: placeholder_metrics(config.forest.class_threshold),
        seed,
        created_at: options.created_at,
        n_train: train.len(),
        n_validation: validation.len(),
    };
    bundle.metrics = evaluate(&bundle, &validation)?;
    Ok(TrainOutcome { bundle, validation })
}

fn placeholder_metrics(threshold: f64) -> EvalMetrics {
    EvalMetrics {
        n: 0,
        threshold,
        accuracy: 0.0,
        recall: None,
        specificity: None,
        precision: None,
        confusion: Confusion::default(),
        predicted_attrition_ratio: 0.0,
        regression: RegressionMetrics::default(),
    }
}

/// Metrics at the bundle's threshold. Regression metrics cover the leavers
/// among `records`, comparing predicted total tenure with `years_at_company`.
pub fn evaluate(bundle: &ModelBundle, records: &[EmployeeRecord]) -> Result<EvalMetrics, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let truth: Vec<bool> = records
        .iter()
        .map(|r| r.attrition.ok_or_else(|| PipelineError::Unlabeled(r.id.clone())))
        .collect::<Result<_, _>>()?;
    let scored: Vec<(f64, f64)> = records
        .par_iter()
        .map(|r| {
            let x = encode(bundle, r).0;
            Ok((predict_proba(&bundle.forest, &x.values)?, predict_ttl(&bundle.regression, &x.values)?))
        })
        .collect::<Result<_, PipelineError>>()?;

    let threshold = bundle.forest.params.class_threshold;
    let predicted: Vec<bool> = scored
        .iter()
        .map(|&(p, _)| classify(p, threshold) == Label::Yes)
        .collect();
    let (ttl, observed): (Vec<f64>, Vec<f64>) = records
        .iter()
        .zip(&scored)
        .filter(|(r, _)| r.attrition == Some(true))
        .map(|(r, &(_, ttl))| (ttl, r.years_at_company))
        .unzip();
    let confusion = Confusion::from_pairs(&truth, &predicted);
    EvalMetrics::from_confusion(confusion, threshold, RegressionMetrics::compute(&ttl, &observed))
        .ok_or(PipelineError::EmptyInput)
}

fn encode(bundle: &ModelBundle, record: &EmployeeRecord) -> (FeatureVector, EncodeDiagnostics) {
    let kpis = derive_kpis(record, &bundle.demand, &bundle.schema);
    bundle.codec.encode(record, &kpis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEmployee {
    pub id: EmployeeId,
    pub attrition_probability: f64,
    pub label: Label,
    pub tenure: TenurePrediction,
    /// Attrition-probability decomposition; `drivers.prediction` equals
    /// `attrition_probability`.
    pub drivers: DriverReport,
    /// Predicted-tenure decomposition.
    pub tenure_drivers: DriverReport,
    /// Display value of each input column and derived feature.
    pub inputs: BTreeMap<String, String>,
    pub diagnostics: EncodeDiagnostics,
    pub scored_at: DateTime<Utc>,
}

impl ScoredEmployee {
    pub fn top_reason(&self) -> Option<&str> {
        self.drivers.top_reasons.first().map(|r| r.text.as_str())
    }
}

pub fn score_employee(bundle: &ModelBundle, record: &EmployeeRecord) -> Result<ScoredEmployee, PipelineError> {
    score_employee_at(bundle, record, Utc::now())
}

pub fn score_employee_at(
    bundle: &ModelBundle,
    record: &EmployeeRecord,
    scored_at: DateTime<Utc>,
) -> Result<ScoredEmployee, PipelineError> {
    let kpis = derive_kpis(record, &bundle.demand, &bundle.schema);
    let (x, diagnostics) = bundle.codec.encode(record, &kpis);
    let meta = FeatureMeta {
        names: &bundle.codec.feature_names,
        sources: &bundle.codec.sources,
        dimensions: &bundle.codec.dimensions,
    };

    let mut drivers = forest_contributions(&bundle.forest, &x.values, meta)?;
    let probability = drivers.prediction;
    let mut tenure_drivers = tenure_contributions(&bundle.regression, &x.values, meta)?;
    let tenure = lead_time(tenure_drivers.prediction, record.years_at_company);

    let mut inputs: BTreeMap<String, String> =
        record.raw.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
    for (name, v) in KPI_FEATURES.iter().zip(kpis.values()) {
        inputs.insert((*name).to_owned(), format_value(v));
    }
    let k = bundle.config.top_k;
    drivers.top_reasons = top_reasons(&drivers, k, ReasonKind::Attrition, &bundle.phrasebook, &inputs);
    tenure_drivers.top_reasons =
        top_reasons(&tenure_drivers, k, ReasonKind::Tenure, &bundle.phrasebook, &inputs);

    Ok(ScoredEmployee {
        id: record.id.clone(),
        attrition_probability: probability,
        label: classify(probability, bundle.forest.params.class_threshold),
        tenure,
        drivers,
        tenure_drivers,
        inputs,
        diagnostics,
        scored_at,
    })
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v}")
    } else {
        format!("{v:.2}")
    }
}

/// Scores every record with one shared timestamp, preserving order.
pub fn score_roster(
    bundle: &ModelBundle,
    records: &[EmployeeRecord],
    scored_at: DateTime<Utc>,
) -> Result<Vec<ScoredEmployee>, PipelineError> {
    records
        .par_iter()
        .map(|r| score_employee_at(bundle, r, scored_at))
        .collect()
}

/// Changes from `before` to `after` (after minus before).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhatIfDelta {
    pub attrition_probability: f64,
    pub ttl: f64,
    pub lead_time: f64,
    pub lead_time_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResult {
    pub before: ScoredEmployee,
    pub after: ScoredEmployee,
    pub delta: WhatIfDelta,
}

/// Column overrides as they arrive in JSON: strings or numbers.
pub type Overrides = BTreeMap<String, Value>;

/// Rescores `record` with some columns replaced. The identifier and target
/// columns cannot be overridden.
pub fn whatif(
    bundle: &ModelBundle,
    record: &EmployeeRecord,
    overrides: &Overrides,
) -> Result<WhatIfResult, PipelineError> {
    whatif_at(bundle, record, overrides, Utc::now())
}

pub fn whatif_at(
    bundle: &ModelBundle,
    record: &EmployeeRecord,
    overrides: &Overrides,
    scored_at: DateTime<Utc>,
) -> Result<WhatIfResult, PipelineError> {
    let schema = &bundle.schema;
    let mut fields = record_fields(record);
    for (column, value) in overrides {
        if schema.column(column).is_none() {
            return Err(PipelineError::UnknownColumn(column.clone()));
        }
        if Some(column) == schema.id_column.as_ref() || *column == schema.target {
            return Err(PipelineError::InvalidOverride {
                column: column.clone(),
                message: "column cannot be overridden".into(),
            });
        }
        let text = value_text(value).ok_or_else(|| PipelineError::InvalidOverride {
            column: column.clone(),
            message: format!("expected a string or number, got {value}"),
        })?;
        fields.insert(column.clone(), text);
    }
    let mut patched = EmployeeRecord::from_fields(schema, &fields, 0, false).map_err(|e| {
        PipelineError::InvalidOverride {
            column: e.column.clone().unwrap_or_default(),
            message: e.message,
        }
    })?;
    patched.id = record.id.clone();

    let before = score_employee_at(bundle, record, scored_at)?;
    let after = score_employee_at(bundle, &patched, scored_at)?;
    let delta = WhatIfDelta {
        attrition_probability: after.attrition_probability - before.attrition_probability,
        ttl: after.tenure.ttl - before.tenure.ttl,
        lead_time: after.tenure.lead_time - before.tenure.lead_time,
        lead_time_raw: after.tenure.lead_time_raw - before.tenure.lead_time_raw,
    };
    Ok(WhatIfResult { before, after, delta })
}

fn record_fields(record: &EmployeeRecord) -> BTreeMap<String, String> {
    record.raw.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
}

fn value_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// A prospective hire as submitted: column name to string or number.
pub type Candidate = BTreeMap<String, Value>;

/// Parses one candidate object or an array of them.
pub fn parse_candidates(bytes: &[u8]) -> Result<Vec<Candidate>, PipelineError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Candidate),
        Many(Vec<Candidate>),
    }
    match serde_json::from_slice(bytes) {
        Ok(OneOrMany::One(c)) => Ok(vec![c]),
        Ok(OneOrMany::Many(cs)) => Ok(cs),
        Err(e) => Err(PipelineError::Record(RowError {
            row: 0,
            column: None,
            message: format!("candidate JSON: {e}"),
        })),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub id: EmployeeId,
    /// `1 - attrition_probability`.
    pub fitment_score: f64,
    pub attrition_probability: f64,
    /// Years; equal to the lead time since a candidate's current tenure is 0.
    pub predicted_total_tenure: f64,
    pub drivers: DriverReport,
    pub tenure_drivers: DriverReport,
}

/// Scores a candidate as a new joiner: the tenure column is forced to 0 and
/// any target value is ignored. Unknown columns are rejected. Without an
/// identifier column value the candidate is called `candidate-{index}`.
pub fn screen_candidate(
    bundle: &ModelBundle,
    candidate: &Candidate,
    index: usize,
) -> Result<ScreeningResult, PipelineError> {
    let schema = &bundle.schema;
    let mut fields = BTreeMap::new();
    for (column, value) in candidate {
        if schema.column(column).is_none() {
            return Err(PipelineError::UnknownColumn(column.clone()));
        }
        if *column == schema.target || value.is_null() {
            continue;
        }
        let text = value_text(value).ok_or_else(|| {
            PipelineError::Record(RowError {
                row: index + 1,
                column: Some(column.clone()),
                message: format!("expected a string or number, got {value}"),
            })
        })?;
        fields.insert(column.clone(), text);
    }
    fields.insert(schema.tenure_column.clone(), "0".into());
    if let Some(id) = &schema.id_column {
        fields
            .entry(id.clone())
            .or_insert_with(|| (index + 1).to_string());
    }
    let mut record =
        EmployeeRecord::from_fields(schema, &fields, index + 1, false).map_err(PipelineError::Record)?;
    if schema.id_column.as_ref().map_or(true, |c| !candidate.contains_key(c)) {
        record.id = EmployeeId(format!("candidate-{}", index + 1));
    }

    let scored = score_employee_at(bundle, &record, DateTime::<Utc>::UNIX_EPOCH)?;
    Ok(ScreeningResult {
        id: scored.id,
        fitment_score: 1.0 - scored.attrition_probability,
        attrition_probability: scored.attrition_probability,
        predicted_total_tenure: scored.tenure.ttl,
        drivers: scored.drivers,
        tenure_drivers: scored.tenure_drivers,
    })
}

/// Best first: higher fitment, then longer predicted tenure, then id.
pub fn compare_candidates(a: &ScreeningResult, b: &ScreeningResult) -> Ordering {
    b.fitment_score
        .total_cmp(&a.fitment_score)
        .then_with(|| b.predicted_total_tenure.total_cmp(&a.predicted_total_tenure))
        .then_with(|| a.id.cmp(&b.id))
}

pub fn rank_candidates(results: &mut [ScreeningResult]) {
    results.sort_by(compare_candidates);
}

/// Numeric value of `column` in `record`, if present and numeric.
pub fn numeric_cell(record: &EmployeeRecord, column: &str) -> Option<f64> {
    record.get(column).and_then(Cell::as_number)
}
