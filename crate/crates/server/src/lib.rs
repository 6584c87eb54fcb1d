//! JSON HTTP API over a trained model and a scored employee roster.
//!
//! | route                     | result                                        |
//! |---------------------------|-----------------------------------------------|
//! | `GET  /api/overview`      | headcount, compensation, actual and predicted attrition |
//! | `GET  /api/employees`     | risk table; `risk=high|all`, `sort=lead_time|probability|id` |
//! | `GET  /api/employees/{id}`| full scored employee with drivers              |
//! | `POST /api/whatif`        | `{id, overrides}` → before, after, delta       |
//! | `POST /api/screen`        | candidate object or array → screening result(s)|
//! | `GET  /api/model`         | bundle metadata and validation metrics         |
//! | `POST /api/rescore`       | rescore the roster against the active bundle   |
//!
//! Errors are `{"error": {"code", "message"}}`: 400 malformed request,
//! 401 bad token, 404 unknown employee, 422 invalid override or candidate,
//! 503 no model loaded.

mod error;
mod state;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use attrition_core::features::Dimension;
use attrition_core::forest::Label;
use attrition_core::ingest::{ColumnSpec, EmployeeId};
use attrition_core::model_store::ModelBundle;
use attrition_core::pipeline::{
    compare_candidates, parse_candidates, screen_candidate, whatif, EvalMetrics, Overrides,
    ScoredEmployee, ScreeningResult, TrainConfig,
};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;
pub use state::{AppState, ServerConfig, Snapshot, TOKEN_ENV};

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                CorsLayer::new()
            }
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);

    Router::new()
        .route("/api/overview", get(overview))
        .route("/api/employees", get(employees))
        .route("/api/employees/{id}", get(employee))
        .route("/api/whatif", post(whatif_handler))
        .route("/api/screen", post(screen))
        .route("/api/model", get(model))
        .route("/api/rescore", post(rescore))
        .layer(middleware::from_fn_with_state(Arc::clone(&state), authorize))
        .layer(cors)
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn authorize(State(state): State<Arc<AppState>>, request: Request, next: Next) -> Result<Response, ApiError> {
    if let Some(token) = &state.config.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return Err(ApiError::unauthorized());
        }
    }
    Ok(next.run(request).await)
}

fn active(state: &AppState) -> Result<Arc<Snapshot>, ApiError> {
    state.snapshot().ok_or_else(ApiError::no_model)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

#[derive(Debug, Serialize)]
struct Overview<'a> {
    summary: &'a attrition_core::ingest::DatasetSummary,
    headcount: usize,
    /// Mean of the schema's compensation column.
    mean_compensation: Option<f64>,
    attrition_ratio: Option<f64>,
    predicted_attrition_count: usize,
    predicted_attrition_ratio: f64,
    scored_at: DateTime<Utc>,
}

async fn overview(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let snap = active(&state)?;
    let flagged = snap.employees.iter().filter(|e| e.label == Label::Yes).count();
    let headcount = snap.employees.len();
    let summary = state.summary();
    let view = Overview {
        summary,
        headcount,
        mean_compensation: summary.mean_monthly_income,
        attrition_ratio: summary.attrition_ratio,
        predicted_attrition_count: flagged,
        predicted_attrition_ratio: if headcount == 0 {
            0.0
        } else {
            flagged as f64 / headcount as f64
        },
        scored_at: snap.scored_at,
    };
    serde_json::to_value(view)
        .map(Json)
        .map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct EmployeeQuery {
    risk: Option<String>,
    sort: Option<String>,
}

/// One row of the risk table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmployeeSummary {
    pub id: EmployeeId,
    pub attrition_probability: f64,
    pub label: Label,
    pub ttl: f64,
    pub lead_time: f64,
    pub lead_time_raw: f64,
    pub overdue: bool,
    pub top_reason: Option<String>,
    pub top_dimension: Option<Dimension>,
}

impl From<&ScoredEmployee> for EmployeeSummary {
    fn from(s: &ScoredEmployee) -> Self {
        let top = s.drivers.top_reasons.first();
        EmployeeSummary {
            id: s.id.clone(),
            attrition_probability: s.attrition_probability,
            label: s.label,
            ttl: s.tenure.ttl,
            lead_time: s.tenure.lead_time,
            lead_time_raw: s.tenure.lead_time_raw,
            overdue: s.tenure.overdue,
            top_reason: top.map(|r| r.text.clone()),
            top_dimension: top.map(|r| r.dimension),
        }
    }
}

/// `risk=high` keeps employees labelled as leavers. `sort=lead_time` (the
/// default) puts the shortest raw lead time first; `sort=probability` the
/// highest risk first. Ties fall back to id order.
async fn employees(
    State(state): State<Arc<AppState>>,
    query: Result<Query<EmployeeQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Vec<EmployeeSummary>> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let snap = active(&state)?;
    let high_only = match q.risk.as_deref() {
        None | Some("all") => false,
        Some("high") => true,
        Some(other) => return Err(ApiError::bad_request(format!("risk must be high or all, got {other}"))),
    };
    let mut rows: Vec<EmployeeSummary> = snap
        .employees
        .iter()
        .filter(|e| !high_only || e.label == Label::Yes)
        .map(EmployeeSummary::from)
        .collect();
    match q.sort.as_deref() {
        None | Some("lead_time") => rows.sort_by(|a, b| {
            a.lead_time_raw
                .total_cmp(&b.lead_time_raw)
                .then_with(|| a.id.cmp(&b.id))
        }),
        Some("probability") => rows.sort_by(|a, b| {
            b.attrition_probability
                .total_cmp(&a.attrition_probability)
                .then_with(|| a.id.cmp(&b.id))
        }),
        Some("id") => rows.sort_by(|a, b| a.id.cmp(&b.id)),
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "sort must be lead_time, probability or id, got {other}"
            )))
        }
    }
    Ok(Json(rows))
}

async fn employee(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ScoredEmployee> {
    let snap = active(&state)?;
    snap.employee(&EmployeeId(id.clone()))
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no employee with id {id}")))
}

#[derive(Debug, Deserialize)]
struct WhatIfRequest {
    id: EmployeeId,
    #[serde(default)]
    overrides: Overrides,
}

async fn whatif_handler(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<WhatIfRequest>, JsonRejection>,
) -> Result<Json<attrition_core::pipeline::WhatIfResult>, ApiError> {
    let req = body(payload)?;
    let snap = active(&state)?;
    let record = state
        .record(&req.id)
        .ok_or_else(|| ApiError::not_found(format!("no employee with id {}", req.id)))?;
    Ok(Json(whatif(&snap.bundle, record, &req.overrides)?))
}

/// A single candidate object gets a single result; an array gets results
/// ranked best first.
async fn screen(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<serde_json::Value>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let value = body(payload)?;
    let snap = active(&state)?;
    let many = value.is_array();
    let bytes = serde_json::to_vec(&value).map_err(|e| ApiError::internal(e.to_string()))?;
    let candidates = parse_candidates(&bytes)?;
    let mut results: Vec<ScreeningResult> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| screen_candidate(&snap.bundle, c, i))
        .collect::<Result<_, _>>()?;
    let out = if many {
        results.sort_by(compare_candidates);
        serde_json::to_value(&results)
    } else {
        serde_json::to_value(&results[0])
    };
    out.map(Json).map_err(|e| ApiError::internal(e.to_string()))
}

/// Bundle metadata for clients, including the schema so forms can validate
/// required fields.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub format_version: u32,
    pub created_at: DateTime<Utc>,
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_trees: usize,
    pub feature_names: Vec<String>,
    pub target: String,
    pub id_column: Option<String>,
    pub tenure_column: String,
    pub columns: Vec<ColumnSpec>,
    pub tenure_features: Vec<String>,
    pub metrics: EvalMetrics,
    pub config: TrainConfig,
    pub dimensions: BTreeMap<String, Dimension>,
    pub notes: Vec<String>,
}

impl From<&ModelBundle> for ModelInfo {
    fn from(b: &ModelBundle) -> Self {
        ModelInfo {
            format_version: b.format_version,
            created_at: b.created_at,
            seed: b.seed,
            n_train: b.n_train,
            n_validation: b.n_validation,
            n_trees: b.forest.trees.len(),
            feature_names: b.codec.feature_names.to_vec(),
            target: b.schema.target.clone(),
            id_column: b.schema.id_column.clone(),
            tenure_column: b.schema.tenure_column.clone(),
            columns: b.schema.columns.clone(),
            tenure_features: b.regression.feature_names.clone(),
            metrics: b.metrics.clone(),
            config: b.config.clone(),
            dimensions: b
                .codec
                .feature_names
                .iter()
                .cloned()
                .zip(b.codec.dimensions.iter().copied())
                .collect(),
            notes: vec![
                "Tenure regression is fit on leavers only; their tenure at exit is the observed total tenure.".into(),
                "Fitment score is 1 minus the attrition probability; candidates are scored with zero current tenure.".into(),
            ],
        }
    }
}

async fn model(State(state): State<Arc<AppState>>) -> ApiResult<ModelInfo> {
    let snap = active(&state)?;
    Ok(Json(ModelInfo::from(snap.bundle.as_ref())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RescoreResult {
    pub scored: usize,
    pub scored_at: DateTime<Utc>,
}

async fn rescore(State(state): State<Arc<AppState>>) -> ApiResult<RescoreResult> {
    let worker = Arc::clone(&state);
    let snap = tokio::task::spawn_blocking(move || worker.rescore())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??
        .ok_or_else(ApiError::no_model)?;
    Ok(Json(RescoreResult {
        scored: snap.employees.len(),
        scored_at: snap.scored_at,
    }))
}
