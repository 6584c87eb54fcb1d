use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use attrition_core::ingest::{summarize, DatasetSummary, EmployeeId, EmployeeRecord};
use attrition_core::model_store::ModelBundle;
use attrition_core::pipeline::{score_roster, PipelineError, ScoredEmployee};
use chrono::{DateTime, Utc};
use serde::Serialize;

/// Environment variable holding the bearer token. Unset or empty leaves the
/// API open.
pub const TOKEN_ENV: &str = "ATTRITION_API_TOKEN";

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub token: Option<String>,
    /// Allowed CORS origin; `None` allows any origin.
    pub cors_origin: Option<String>,
    /// Where each scored snapshot is written, if anywhere.
    pub snapshot_path: Option<PathBuf>,
}

impl ServerConfig {
    pub fn with_token_from_env(mut self) -> Self {
        self.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        self
    }
}

/// A bundle together with the roster scored against it. Handlers take one
/// snapshot at the start of a request and use only that.
#[derive(Debug, Serialize)]
pub struct Snapshot {
    #[serde(skip)]
    pub bundle: Arc<ModelBundle>,
    pub model_created_at: DateTime<Utc>,
    pub scored_at: DateTime<Utc>,
    pub employees: Vec<ScoredEmployee>,
    #[serde(skip)]
    index: HashMap<EmployeeId, usize>,
}

impl Snapshot {
    pub fn employee(&self, id: &EmployeeId) -> Option<&ScoredEmployee> {
        self.index.get(id).map(|&i| &self.employees[i])
    }
}

#[derive(Debug)]
pub struct AppState {
    pub config: ServerConfig,
    roster: Vec<EmployeeRecord>,
    roster_index: HashMap<EmployeeId, usize>,
    summary: DatasetSummary,
    active: RwLock<Option<Arc<Snapshot>>>,
    /// Serializes installs and rescores so each publishes a complete snapshot.
    exclusive: Mutex<()>,
}

impl AppState {
    /// `schema` must be the one the roster was loaded with.
    pub fn new(
        roster: Vec<EmployeeRecord>,
        schema: &attrition_core::ingest::DatasetSchema,
        config: ServerConfig,
    ) -> Self {
        let summary = summarize(&roster, schema);
        let roster_index = roster.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        AppState {
            config,
            roster,
            roster_index,
            summary,
            active: RwLock::new(None),
            exclusive: Mutex::new(()),
        }
    }

    pub fn summary(&self) -> &DatasetSummary {
        &self.summary
    }

    pub fn roster(&self) -> &[EmployeeRecord] {
        &self.roster
    }

    pub fn record(&self, id: &EmployeeId) -> Option<&EmployeeRecord> {
        self.roster_index.get(id).map(|&i| &self.roster[i])
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.active.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    /// Scores the roster against `bundle` and publishes the result. Blocking.
    pub fn install(&self, bundle: ModelBundle) -> Result<Arc<Snapshot>, PipelineError> {
        let _guard = self.exclusive.lock().unwrap_or_else(PoisonError::into_inner);
        self.publish(Arc::new(bundle))
    }

    /// Rescores the roster against the active bundle. Blocking.
    pub fn rescore(&self) -> Result<Option<Arc<Snapshot>>, PipelineError> {
        let _guard = self.exclusive.lock().unwrap_or_else(PoisonError::into_inner);
        match self.snapshot() {
            Some(current) => self.publish(Arc::clone(&current.bundle)).map(Some),
            None => Ok(None),
        }
    }

    fn publish(&self, bundle: Arc<ModelBundle>) -> Result<Arc<Snapshot>, PipelineError> {
        let scored_at = Utc::now();
        let employees = score_roster(&bundle, &self.roster, scored_at)?;
        let index = employees.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let snapshot = Arc::new(Snapshot {
            model_created_at: bundle.created_at,
            bundle,
            scored_at,
            employees,
            index,
        });
        self.persist(&snapshot);
        *self.active.write().unwrap_or_else(PoisonError::into_inner) = Some(Arc::clone(&snapshot));
        log::info!("published snapshot of {} employees", snapshot.employees.len());
        Ok(snapshot)
    }

    fn persist(&self, snapshot: &Snapshot) {
        let Some(path) = &self.config.snapshot_path else {
            return;
        };
        let written = serde_json::to_vec(snapshot)
            .map_err(std::io::Error::other)
            .and_then(|bytes| std::fs::write(path, bytes));
        if let Err(e) = written {
            log::warn!("cannot write snapshot to {}: {e}", path.display());
        }
    }
}
