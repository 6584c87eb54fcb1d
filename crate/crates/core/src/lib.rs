//! Employee attrition risk, expected tenure and per-employee drivers.
//!
//! Data flows `ingest` → `features` → (`forest`, `linreg`) → `drivers`, with
//! `pipeline` orchestrating a run and `model_store` persisting its result.

pub mod drivers;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod linreg;
pub mod model_store;
pub mod pipeline;

pub use model_store::{load_bundle, save_bundle, ModelBundle};
pub use pipeline::{evaluate, score_employee, screen_candidate, train_all, whatif};
